// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapefill/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "io_util.hpp"
#include "shapefill/random.hpp"
#include "shapefill/voxel.hpp"

namespace shapefill {

PointCloud::PointCloud(std::vector<Vec3> points) : points_(std::move(points)), frame_(Frame::world_mm) {}

PointCloud::PointCloud(std::vector<Vec3> points, NormTransform transform)
    : points_(std::move(points)), frame_(Frame::normalized), transform_(transform) {
  if (!(transform.scale > 0.0)) throw ValidationError("normalization scale must be positive");
}

PointCloud PointCloud::with_points(std::vector<Vec3> points) const {
  PointCloud out = *this;
  out.points_ = std::move(points);
  return out;
}

void PointCloud::check_normalized_range() const {
  if (frame_ != Frame::normalized) throw ValidationError("cloud is not in the normalized frame");
  for (const Vec3& p : points_) {
    for (int a = 0; a < 3; ++a) {
      if (!(p[a] >= -kNormalizedSlack && p[a] <= 1.0 + kNormalizedSlack)) {
        throw ValidationError("normalized coordinate outside [-0.1, 1.1]");
      }
    }
  }
}

namespace cloud {

PointCloud cloud_from_volume(const VoxelVolume& v) {
  std::vector<Vec3> pts;
  pts.reserve(v.count());
  const Shape3& s = v.shape();
  for (int z = 0; z < s[2]; ++z)
    for (int y = 0; y < s[1]; ++y)
      for (int x = 0; x < s[0]; ++x)
        if (v.at(x, y, z)) pts.push_back(v.world_center(x, y, z));
  if (pts.empty()) throw ValidationError("volume has no foreground voxels");
  return PointCloud(std::move(pts));
}

PointCloud normalize(const PointCloud& pc) {
  if (pc.frame() != Frame::world_mm) throw ValidationError("normalize expects a world-frame cloud");
  if (pc.empty()) throw ValidationError("cannot normalize an empty cloud");
  Vec3 lo = pc[0], hi = pc[0];
  for (const Vec3& p : pc.points()) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double scale = (hi - lo).maxCoeff();
  if (!(scale > 0.0)) throw ValidationError("degenerate cloud: all points coincide");
  NormTransform t{lo, scale};
  std::vector<Vec3> out;
  out.reserve(pc.size());
  for (const Vec3& p : pc.points()) out.push_back(t.to_normalized(p));
  return PointCloud(std::move(out), t);
}

PointCloud denormalize(const PointCloud& pc) {
  if (pc.frame() != Frame::normalized || !pc.transform()) throw ValidationError("cloud is not normalized");
  std::vector<Vec3> out;
  out.reserve(pc.size());
  for (const Vec3& p : pc.points()) out.push_back(pc.transform()->to_world(p));
  return PointCloud(std::move(out));
}

std::vector<std::size_t> sample_indices(std::size_t size, std::size_t count, std::uint64_t seed) {
  if (size == 0) throw ValidationError("cannot sample from an empty cloud");
  Rng rng(seed);
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng.shuffle(idx);
  if (count <= size) {
    idx.resize(count);
  } else {
    while (idx.size() < count) idx.push_back(rng.index(size));
  }
  return idx;
}

GroupSplit split_groups(const PointCloud& pc, std::size_t group_in, std::uint64_t seed, std::size_t group_out) {
  if (pc.empty()) throw ValidationError("cannot split an empty cloud");
  if (group_in < 1) throw ValidationError("group size must be >= 1");
  if (pc.frame() != Frame::normalized) throw ValidationError("split_groups expects a normalized cloud");
  Rng rng(seed);
  GroupSplit split;
  split.group_in = group_in;
  split.group_out = group_out;
  split.permutation.resize(pc.size());
  std::iota(split.permutation.begin(), split.permutation.end(), std::size_t{0});
  rng.shuffle(split.permutation);

  const std::size_t n_groups = (pc.size() + group_in - 1) / group_in;
  split.groups.resize(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) {
    const std::size_t begin = g * group_in;
    const std::size_t end = std::min(begin + group_in, pc.size());
    split.groups[g].assign(split.permutation.begin() + static_cast<std::ptrdiff_t>(begin),
                           split.permutation.begin() + static_cast<std::ptrdiff_t>(end));
  }
  auto& last = split.groups.back();
  split.padding = group_in - last.size();
  while (last.size() < group_in) last.push_back(rng.index(pc.size()));
  return split;
}

PointCloud gather(const PointCloud& pc, std::span<const std::size_t> indices) {
  std::vector<Vec3> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= pc.size()) throw ValidationError("gather index out of range");
    out.push_back(pc[i]);
  }
  return pc.with_points(std::move(out));
}

PointCloud merge(std::span<const PointCloud> clouds) {
  if (clouds.empty()) throw ValidationError("nothing to merge");
  const PointCloud& first = clouds.front();
  std::size_t total = 0;
  for (const PointCloud& c : clouds) {
    if (c.frame() != first.frame() || c.transform() != first.transform()) {
      throw ValidationError("merge: clouds carry different normalization transforms");
    }
    total += c.size();
  }
  std::vector<Vec3> out;
  out.reserve(total);
  for (const PointCloud& c : clouds) out.insert(out.end(), c.points().begin(), c.points().end());
  return first.with_points(std::move(out));
}

PointCloud jitter(const PointCloud& pc, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ValidationError("jitter sigma must be >= 0");
  if (sigma == 0.0) return pc;
  Rng rng(seed);
  std::vector<Vec3> out(pc.points().begin(), pc.points().end());
  for (Vec3& p : out) {
    for (int a = 0; a < 3; ++a) p[a] += sigma * rng.normal();
  }
  return pc.with_points(std::move(out));
}

Augmented augment(const PointCloud& pc, const AugmentConfig& cfg, std::uint64_t seed) {
  if (pc.frame() != Frame::normalized) throw ValidationError("augment expects a normalized cloud");
  if (cfg.max_crop_fraction < 0.0 || cfg.max_crop_fraction >= 1.0 || cfg.max_angle < 0.0 || cfg.max_shift < 0.0) {
    throw ValidationError("augment magnitudes out of range");
  }
  Rng rng(seed);
  std::vector<Vec3> pts(pc.points().begin(), pc.points().end());
  rng.shuffle(pts);

  if (cfg.max_crop_fraction > 0.0) {
    const int axis = static_cast<int>(rng.index(3));
    const bool from_top = rng.index(2) == 1;
    const double fraction = rng.uniform(0.0, cfg.max_crop_fraction);
    const auto remove = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(pts.size())));
    if (pts.size() - remove < 2) throw ValidationError("crop would leave fewer than 2 points");
    if (remove > 0) {
      // Planar cut: drop the `remove` points that lie furthest along the chosen side.
      std::vector<std::size_t> order(pts.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return from_top ? pts[a][axis] > pts[b][axis] : pts[a][axis] < pts[b][axis];
      });
      std::vector<std::uint8_t> keep(pts.size(), 1);
      for (std::size_t i = 0; i < remove; ++i) keep[order[i]] = 0;
      std::vector<Vec3> kept;
      kept.reserve(pts.size() - remove);
      for (std::size_t i = 0; i < pts.size(); ++i)
        if (keep[i]) kept.push_back(pts[i]);
      pts.swap(kept);
    }
  } else if (pts.size() < 2) {
    throw ValidationError("augment needs at least 2 points");
  }

  RigidMotion motion;
  if (cfg.max_angle > 0.0) {
    Vec3 axis;
    do {
      axis = Vec3(rng.normal(), rng.normal(), rng.normal());
    } while (axis.norm() < 1e-12);
    axis.normalize();
    const double angle = rng.uniform(-cfg.max_angle, cfg.max_angle);
    motion.rotation = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : pts) centroid += p;
    motion.center = centroid / static_cast<double>(pts.size());
  }
  if (cfg.max_shift > 0.0) {
    for (int a = 0; a < 3; ++a) motion.translation[a] = rng.uniform(-cfg.max_shift, cfg.max_shift);
  }
  for (Vec3& p : pts) p = motion.apply(p);
  return {pc.with_points(std::move(pts)), motion};
}

namespace {

void put_f32(std::string& out, double d) {
  const float f = static_cast<float>(d);
  char b[4];
  std::memcpy(b, &f, 4);
  out.append(b, 4);
}

}  // namespace

void write_ply(const PointCloud& pc, const std::filesystem::path& path, bool binary) {
  std::ostringstream header;
  header.precision(17);
  header << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
  if (pc.frame() == Frame::normalized && pc.transform()) {
    const auto& t = *pc.transform();
    header << "comment norm " << t.shift[0] << ' ' << t.shift[1] << ' ' << t.shift[2] << ' ' << t.scale << '\n';
  }
  header << "element vertex " << pc.size() << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  std::string out = header.str();
  if (binary) {
    out.reserve(out.size() + pc.size() * 12);
    for (const Vec3& p : pc.points())
      for (int a = 0; a < 3; ++a) put_f32(out, p[a]);
  } else {
    std::ostringstream body;
    body.precision(9);
    for (const Vec3& p : pc.points()) body << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
    out += body.str();
  }
  io::write_file_atomic(path, out);
}

PointCloud read_ply(const std::filesystem::path& path) {
  const std::string file = io::read_file(path);
  const auto end = file.find("end_header\n");
  if (file.rfind("ply", 0) != 0 || end == std::string::npos) throw ValidationError("not a PLY file: " + path.string());
  std::istringstream hs(file.substr(0, end));
  std::string line;
  bool binary = false;
  std::size_t count = 0;
  int props = 0;
  std::optional<NormTransform> norm;
  bool in_vertex = false;
  while (std::getline(hs, line)) {
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian") {
        binary = true;
      } else if (fmt != "ascii") {
        throw UnsupportedError("unsupported PLY format: " + fmt);
      }
    } else if (kw == "comment") {
      std::string tag;
      ls >> tag;
      if (tag == "norm") {
        NormTransform t;
        ls >> t.shift[0] >> t.shift[1] >> t.shift[2] >> t.scale;
        if (!ls) throw ValidationError("malformed PLY norm comment");
        norm = t;
      }
    } else if (kw == "element") {
      std::string name;
      ls >> name;
      in_vertex = name == "vertex";
      if (in_vertex) ls >> count;
    } else if (kw == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      const int expected = props;
      if ((type != "float" && type != "float32") || name != std::string(1, static_cast<char>('x' + expected))) {
        throw UnsupportedError("PLY vertices must be float x, y, z");
      }
      ++props;
    }
  }
  if (props != 3) throw UnsupportedError("PLY vertices must be float x, y, z");
  std::vector<Vec3> pts;
  pts.reserve(count);
  const std::size_t body = end + std::string("end_header\n").size();
  if (binary) {
    if (file.size() < body + count * 12) throw ValidationError("truncated PLY payload");
    for (std::size_t i = 0; i < count; ++i) {
      Vec3 p;
      for (int a = 0; a < 3; ++a) {
        float f;
        std::memcpy(&f, file.data() + body + i * 12 + a * 4, 4);
        p[a] = f;
      }
      pts.push_back(p);
    }
  } else {
    std::istringstream bs(file.substr(body));
    for (std::size_t i = 0; i < count; ++i) {
      Vec3 p;
      if (!(bs >> p[0] >> p[1] >> p[2])) throw ValidationError("truncated PLY payload");
      pts.push_back(p);
    }
  }
  if (norm) return PointCloud(std::move(pts), *norm);
  return PointCloud(std::move(pts));
}

}  // namespace cloud
}  // namespace shapefill
