// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapefill/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <system_error>

#include "shapefill/random.hpp"

namespace fs = std::filesystem;

namespace shapefill {

void PhantomSpec::validate() const {
  if (grid < 8) throw ValidationError("phantom.grid must be >= 8");
  if (thickness < 1) throw ValidationError("phantom.thickness must be >= 1");
  if (!std::isfinite(radius) || radius <= thickness) throw ValidationError("phantom.radius must exceed the thickness");
  if (radius + 2.5 > 0.5 * (grid - 1)) throw ValidationError("phantom.radius does not fit the grid");
  if (!(defect_fraction > 0.0 && defect_fraction < 0.5)) {
    throw ValidationError("phantom.defect_fraction must be in (0, 0.5)");
  }
}

namespace data {
namespace {

constexpr std::string_view kSkullBreak =
    "SkullBreak: <root>/{training,testing}/defective_skull/<class>/<name>.nrrd with the ground-truth\n"
    "defect at <root>/<split>/implant/<class>/<name>.nrrd and the optional complete skull at\n"
    "<root>/<split>/complete_skull/<name>.nrrd. <class> is the defect class (bilateral, frontoorbital,\n"
    "parietotemporal, random_1, random_2). Case ids are <split>/<class>/<name>.";
constexpr std::string_view kSkullFix =
    "SkullFix: <root>/{training_set,test_set}/defective_skull/<name>.nrrd with the ground-truth\n"
    "defect at <root>/<split>/implant/<name>.nrrd and the optional complete skull at\n"
    "<root>/<split>/complete_skull/<name>.nrrd. Case ids are <split>/<name>.";
constexpr std::string_view kPhantoms =
    "phantoms: <root>/<case>/defective.json with defect.json and complete.json (raw sidecars alongside),\n"
    "as written by `shapefill phantoms`. All cases belong to the test split. Case ids are <case>.";

bool is_volume_file(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".nrrd" || ext == ".json";
}

std::vector<fs::path> volume_files(const fs::path& dir) {
  std::vector<fs::path> out;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_volume_file(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<fs::path> subdirectories(const fs::path& dir) {
  std::vector<fs::path> out;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void check_exists(CaseRecord& r, const fs::path& p) {
  if (!fs::exists(p)) r.missing.push_back(p.string());
}

void scan_skullbreak(const fs::path& root, std::vector<CaseRecord>& out) {
  for (const auto& [dir, split] : {std::pair{"training", DatasetSplit::train}, std::pair{"testing", DatasetSplit::test}}) {
    const fs::path base = root / dir;
    for (const fs::path& cls : subdirectories(base / "defective_skull")) {
      const std::string cname = cls.filename().string();
      for (const fs::path& f : volume_files(cls)) {
        CaseRecord r;
        r.id = std::string(dir) + "/" + cname + "/" + f.stem().string();
        r.split = split;
        r.defect_class = cname;
        r.defective = f;
        r.defect = base / "implant" / cname / f.filename();
        check_exists(r, r.defect);
        const fs::path complete = base / "complete_skull" / f.filename();
        if (fs::exists(complete)) r.complete = complete;
        out.push_back(std::move(r));
      }
    }
  }
}

void scan_skullfix(const fs::path& root, std::vector<CaseRecord>& out) {
  for (const auto& [dir, split] :
       {std::pair{"training_set", DatasetSplit::train}, std::pair{"test_set", DatasetSplit::test}}) {
    const fs::path base = root / dir;
    for (const fs::path& f : volume_files(base / "defective_skull")) {
      CaseRecord r;
      r.id = std::string(dir) + "/" + f.stem().string();
      r.split = split;
      r.defective = f;
      r.defect = base / "implant" / f.filename();
      check_exists(r, r.defect);
      const fs::path complete = base / "complete_skull" / f.filename();
      if (fs::exists(complete)) r.complete = complete;
      out.push_back(std::move(r));
    }
  }
}

void scan_phantoms(const fs::path& root, std::vector<CaseRecord>& out) {
  for (const fs::path& dir : subdirectories(root)) {
    const fs::path defective = dir / "defective.json";
    if (!fs::exists(defective)) continue;
    CaseRecord r;
    r.id = dir.filename().string();
    r.split = DatasetSplit::test;
    r.defective = defective;
    r.defect = dir / "defect.json";
    check_exists(r, r.defect);
    if (fs::exists(dir / "complete.json")) r.complete = dir / "complete.json";
    out.push_back(std::move(r));
  }
}

}  // namespace

std::string_view layout_description(DatasetLayout layout) {
  switch (layout) {
    case DatasetLayout::skullbreak:
      return kSkullBreak;
    case DatasetLayout::skullfix:
      return kSkullFix;
    case DatasetLayout::phantoms:
      return kPhantoms;
  }
  return {};
}

DatasetLayout parse_layout(std::string_view name) {
  if (name == "skullbreak") return DatasetLayout::skullbreak;
  if (name == "skullfix") return DatasetLayout::skullfix;
  if (name == "phantoms") return DatasetLayout::phantoms;
  throw ValidationError("unknown dataset layout '" + std::string(name) + "' (skullbreak, skullfix, phantoms)");
}

DatasetScan scan_dataset(const fs::path& root, DatasetLayout layout) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw IoError("dataset root is not a readable directory: " + root.string());
  DatasetScan scan;
  try {
    switch (layout) {
      case DatasetLayout::skullbreak:
        scan_skullbreak(root, scan.records);
        break;
      case DatasetLayout::skullfix:
        scan_skullfix(root, scan.records);
        break;
      case DatasetLayout::phantoms:
        scan_phantoms(root, scan.records);
        break;
    }
  } catch (const fs::filesystem_error& e) {
    throw IoError(std::string("cannot scan dataset: ") + e.what());
  }
  if (scan.records.empty()) throw ValidationError("no cases found under " + root.string());
  std::stable_sort(scan.records.begin(), scan.records.end(), [](const CaseRecord& a, const CaseRecord& b) {
    if (a.split != b.split) return a.split < b.split;
    return a.id < b.id;
  });
  for (const CaseRecord& r : scan.records) {
    (r.split == DatasetSplit::train ? scan.train : scan.test) += 1;
    scan.flagged += r.complete_pair() ? 0 : 1;
  }
  return scan;
}

VoxelVolume resample_spacing(const VoxelVolume& v, double target_mm) {
  if (!std::isfinite(target_mm) || target_mm <= 0.0) throw ValidationError("target spacing must be > 0");
  Shape3 shape{};
  for (int a = 0; a < 3; ++a) {
    const double extent = v.shape()[a] * v.spacing()[a];
    shape[a] = static_cast<int>(std::lround(extent / target_mm));
    if (shape[a] < 2) throw ValidationError("resampled volume would have fewer than 2 voxels on an axis");
  }
  const Vec3 spacing = Vec3::Constant(target_mm);
  // Keep the lower physical edge of the grid in place.
  const Vec3 origin = v.origin() - 0.5 * v.spacing() + 0.5 * spacing;
  std::array<std::vector<int>, 3> src;
  for (int a = 0; a < 3; ++a) {
    src[a].resize(static_cast<std::size_t>(shape[a]));
    for (int i = 0; i < shape[a]; ++i) {
      const double pos = (i + 0.5) * target_mm / v.spacing()[a];
      src[a][static_cast<std::size_t>(i)] = std::clamp(static_cast<int>(std::floor(pos)), 0, v.shape()[a] - 1);
    }
  }
  VoxelVolume out(shape, spacing, origin);
  for (int z = 0; z < shape[2]; ++z)
    for (int y = 0; y < shape[1]; ++y)
      for (int x = 0; x < shape[0]; ++x) {
        if (v.at(src[0][static_cast<std::size_t>(x)], src[1][static_cast<std::size_t>(y)],
                 src[2][static_cast<std::size_t>(z)])) {
          out.set(x, y, z, true);
        }
      }
  return out;
}

Phantom make_phantom(const PhantomSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const double mid = 0.5 * (spec.grid - 1);
  const Vec3 center(mid + rng.uniform(-2.0, 2.0), mid + rng.uniform(-2.0, 2.0), mid + rng.uniform(-2.0, 2.0));
  Vec3 axes = Vec3::Ones();
  if (spec.kind == PhantomSpec::Kind::ellipsoid_shell) {
    axes[1] = rng.uniform(0.75, 1.0);
    axes[2] = rng.uniform(0.75, 1.0);
  }
  Vec3 dir;
  do {
    dir = Vec3(rng.normal(), rng.normal(), rng.normal());
  } while (dir.norm() < 1e-6);
  dir.normalize();
  const double cos_half_angle = 1.0 - 2.0 * spec.defect_fraction;
  const double inner = spec.radius - spec.thickness;

  const Shape3 shape{spec.grid, spec.grid, spec.grid};
  Phantom ph{VoxelVolume(shape, Vec3::Ones(), Vec3::Zero()), VoxelVolume(shape, Vec3::Ones(), Vec3::Zero()),
             VoxelVolume(shape, Vec3::Ones(), Vec3::Zero())};
  for (int z = 0; z < spec.grid; ++z)
    for (int y = 0; y < spec.grid; ++y)
      for (int x = 0; x < spec.grid; ++x) {
        const Vec3 d = Vec3(x, y, z) - center;
        const double rho = d.cwiseQuotient(axes).norm();
        if (rho > spec.radius || rho <= inner) continue;
        ph.complete.set(x, y, z, true);
        const bool in_cone = d.dot(dir) >= cos_half_angle * d.norm();
        (in_cone ? ph.defect : ph.defective).set(x, y, z, true);
      }
  if (ph.defect.count() == 0) throw ValidationError("phantom defect is empty at this fraction and thickness");
  return ph;
}

PhantomSpec phantom_spec(const PhantomSpec& base, std::size_t index) {
  PhantomSpec s = base;
  s.seed = derive_seed(base.seed, index);
  return s;
}

VoxelVolume solid_block(std::size_t voxels, int width) {
  if (voxels == 0) throw ValidationError("solid block needs at least one voxel");
  if (width < 1) throw ValidationError("solid block width must be >= 1");
  const std::size_t layer = static_cast<std::size_t>(width) * static_cast<std::size_t>(width);
  const int layers = static_cast<int>((voxels + layer - 1) / layer);
  VoxelVolume v({width + 2, width + 2, layers + 2}, Vec3::Ones(), Vec3::Zero());
  std::size_t placed = 0;
  for (int z = 1; z <= layers; ++z)
    for (int y = 1; y <= width; ++y)
      for (int x = 1; x <= width && placed < voxels; ++x, ++placed) v.set(x, y, z, true);
  return v;
}

void write_phantom_set(const PhantomSpec& base, std::size_t count, const fs::path& dir) {
  for (std::size_t i = 0; i < count; ++i) {
    const Phantom ph = make_phantom(phantom_spec(base, i));
    char name[32];
    std::snprintf(name, sizeof name, "case_%03zu", i);
    const fs::path d = dir / name;
    std::error_code ec;
    fs::create_directories(d, ec);
    if (ec) throw IoError("cannot create " + d.string() + ": " + ec.message());
    voxel::save_volume(ph.defective, d / "defective");
    voxel::save_volume(ph.defect, d / "defect");
    voxel::save_volume(ph.complete, d / "complete");
  }
}

}  // namespace data
}  // namespace shapefill
