// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shapefill/voxel.hpp"

namespace shapefill {

// Distance metrics are missing when either surface is empty.
struct MetricsReport {
  std::string id;
  Shape3 shape{0, 0, 0};
  Vec3 spacing = Vec3::Ones();
  double dsc = 0.0;
  double bdsc = 0.0;
  std::optional<double> hd95_mm;
  std::optional<double> cd_mm;
  std::string error;  // set when the case could not be evaluated
};

struct MetricsSummary {
  std::size_t cases = 0;      // evaluated cases
  std::size_t distances = 0;  // cases contributing to the distance means
  double dsc = 0.0;
  double bdsc = 0.0;
  std::optional<double> hd95_mm;
  std::optional<double> cd_mm;
};

namespace metrics {

// 2|P and G| / (|P| + |G|); 1 when both are empty.
double dice(const VoxelVolume& pred, const VoxelVolume& gt);

// Dice of the two boundary sets, each dilated by a cube of `tolerance_vox`.
// The boundary of X is X minus its 6-connected erosion, with voxels beyond the
// grid counted as background.
double boundary_dice(const VoxelVolume& pred, const VoxelVolume& gt, int tolerance_vox = 1);

// Boundary voxels as above.
VoxelVolume boundary(const VoxelVolume& v);

// 95th percentile (linear interpolation between order statistics) of the
// pooled directed boundary-to-boundary distances in millimetres.
double hausdorff95(const VoxelVolume& pred, const VoxelVolume& gt);

// Mean of the two directed mean boundary distances, in millimetres.
double chamfer_mm(const VoxelVolume& pred, const VoxelVolume& gt);

MetricsReport evaluate_case(const VoxelVolume& pred, const VoxelVolume& gt, std::string id = {});

// Means over the cases without an error.
MetricsSummary aggregate(std::span<const MetricsReport> reports);

std::string to_json(const MetricsReport& report);
// Header `id,dsc,bdsc,hd95_mm,cd_mm`, one row per case and a final `mean` row.
std::string to_csv(std::span<const MetricsReport> reports);

}  // namespace metrics
}  // namespace shapefill
