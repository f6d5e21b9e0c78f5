// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapefill/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "shapefill/neighbors.hpp"

namespace shapefill::metrics {
namespace {

void require_same_grid(const VoxelVolume& a, const VoxelVolume& b) {
  if (!a.same_grid(b)) throw ValidationError("prediction and ground truth lie on different grids");
}

// Boundary voxel positions in millimetres relative to voxel (0,0,0).
std::vector<Vec3> boundary_points(const VoxelVolume& v) {
  const VoxelVolume b = boundary(v);
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!b.at(i)) continue;
    const Shape3 c = b.coords(i);
    out.emplace_back(c[0] * v.spacing()[0], c[1] * v.spacing()[1], c[2] * v.spacing()[2]);
  }
  return out;
}

std::vector<double> directed(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  return neighbors::knn(from, to, 1, false).distances;
}

struct Distances {
  std::vector<double> forward, backward;
};

Distances distances(const VoxelVolume& pred, const VoxelVolume& gt) {
  require_same_grid(pred, gt);
  const auto p = boundary_points(pred), g = boundary_points(gt);
  if (p.empty() || g.empty()) throw ValidationError("distance metrics need non-empty prediction and ground truth");
  return {directed(p, g), directed(g, p)};
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string format(double x) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed << x;
  return out.str();
}

std::string format(const std::optional<double>& x) { return x ? format(*x) : std::string(); }

}  // namespace

double dice(const VoxelVolume& pred, const VoxelVolume& gt) {
  require_same_grid(pred, gt);
  std::size_t inter = 0, np = 0, ng = 0;
  const auto a = pred.data(), b = gt.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    np += a[i] != 0;
    ng += b[i] != 0;
    inter += a[i] != 0 && b[i] != 0;
  }
  if (np + ng == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(np + ng);
}

VoxelVolume boundary(const VoxelVolume& v) {
  const VoxelVolume inner = voxel::erode(v, {StructuringElement::Kind::cross6, 1}, false);
  VoxelVolume out = v.blank_like();
  for (std::size_t i = 0; i < v.size(); ++i) out.set(i, v.at(i) && !inner.at(i));
  return out;
}

double boundary_dice(const VoxelVolume& pred, const VoxelVolume& gt, int tolerance_vox) {
  require_same_grid(pred, gt);
  if (tolerance_vox < 0) throw ValidationError("boundary tolerance must be >= 0");
  VoxelVolume bp = boundary(pred), bg = boundary(gt);
  if (tolerance_vox > 0) {
    const StructuringElement se{StructuringElement::Kind::cube26, tolerance_vox};
    bp = voxel::dilate(bp, se);
    bg = voxel::dilate(bg, se);
  }
  return dice(bp, bg);
}

double hausdorff95(const VoxelVolume& pred, const VoxelVolume& gt) {
  Distances d = distances(pred, gt);
  std::vector<double> all = std::move(d.forward);
  all.insert(all.end(), d.backward.begin(), d.backward.end());
  std::sort(all.begin(), all.end());
  const double rank = 0.95 * static_cast<double>(all.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  return all[lo] + (rank - static_cast<double>(lo)) * (all[hi] - all[lo]);
}

double chamfer_mm(const VoxelVolume& pred, const VoxelVolume& gt) {
  const Distances d = distances(pred, gt);
  return 0.5 * (mean(d.forward) + mean(d.backward));
}

MetricsReport evaluate_case(const VoxelVolume& pred, const VoxelVolume& gt, std::string id) {
  MetricsReport r;
  r.id = std::move(id);
  r.shape = gt.shape();
  r.spacing = gt.spacing();
  try {
    r.dsc = dice(pred, gt);
    r.bdsc = boundary_dice(pred, gt);
  } catch (const Error& e) {
    r.error = e.what();
    return r;
  }
  if (pred.count() > 0 && gt.count() > 0) {
    r.hd95_mm = hausdorff95(pred, gt);
    r.cd_mm = chamfer_mm(pred, gt);
  }
  return r;
}

MetricsSummary aggregate(std::span<const MetricsReport> reports) {
  MetricsSummary s;
  double hd = 0.0, cd = 0.0;
  for (const MetricsReport& r : reports) {
    if (!r.error.empty()) continue;
    ++s.cases;
    s.dsc += r.dsc;
    s.bdsc += r.bdsc;
    if (r.hd95_mm && r.cd_mm) {
      ++s.distances;
      hd += *r.hd95_mm;
      cd += *r.cd_mm;
    }
  }
  if (s.cases > 0) {
    s.dsc /= static_cast<double>(s.cases);
    s.bdsc /= static_cast<double>(s.cases);
  }
  if (s.distances > 0) {
    s.hd95_mm = hd / static_cast<double>(s.distances);
    s.cd_mm = cd / static_cast<double>(s.distances);
  }
  return s;
}

std::string to_json(const MetricsReport& r) {
  using nlohmann::json;
  json doc = {{"id", r.id},
              {"shape", {r.shape[0], r.shape[1], r.shape[2]}},
              {"spacing_mm", {r.spacing[0], r.spacing[1], r.spacing[2]}}};
  if (!r.error.empty()) {
    doc["error"] = r.error;
  } else {
    doc["dsc"] = r.dsc;
    doc["bdsc"] = r.bdsc;
    doc["hd95_mm"] = r.hd95_mm ? json(*r.hd95_mm) : json(nullptr);
    doc["cd_mm"] = r.cd_mm ? json(*r.cd_mm) : json(nullptr);
  }
  return doc.dump(2) + "\n";
}

std::string to_csv(std::span<const MetricsReport> reports) {
  std::ostringstream out;
  out << "id,dsc,bdsc,hd95_mm,cd_mm\n";
  for (const MetricsReport& r : reports) {
    if (!r.error.empty()) continue;
    out << r.id << ',' << format(r.dsc) << ',' << format(r.bdsc) << ',' << format(r.hd95_mm) << ','
        << format(r.cd_mm) << '\n';
  }
  const MetricsSummary s = aggregate(reports);
  if (s.cases > 0) {
    out << "mean," << format(s.dsc) << ',' << format(s.bdsc) << ',' << format(s.hd95_mm) << ','
        << format(s.cd_mm) << '\n';
  }
  return out.str();
}

}  // namespace shapefill::metrics
