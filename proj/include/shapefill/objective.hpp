// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shapefill/common.hpp"
#include "shapefill/neighbors.hpp"

namespace shapefill {

class PointCloud;

struct ObjectiveConfig {
  enum class Kind { cd, ecd, dacd, dacd_knn };
  Kind kind = Kind::dacd_knn;
  double alpha = 0.1;        // weight of the neighbor-uniformity term
  int k = 4;                 // neighborhood size of the uniformity term
  double temperature = 1.0;  // sharpness of the density-aware exponential

  void validate() const;
};

// Scalar loss and its gradient with respect to the reconstructed cloud.
struct LossValue {
  double value = 0.0;
  std::vector<Vec3> gradient;  // empty when not requested
};

namespace objective {

// Mean squared nearest-neighbor distance pr->pgt plus pgt->pr.
LossValue chamfer(std::span<const Vec3> pr, std::span<const Vec3> pgt, bool with_gradient = true);

// Larger of the two directional mean (unsquared) nearest-neighbor distances.
LossValue extended_chamfer(std::span<const Vec3> pr, std::span<const Vec3> pgt, bool with_gradient = true);

// Density-aware Chamfer distance:
//   1/2 [ mean_x (1 - exp(-t d(x, y^)) / n_y^) + mean_y (1 - exp(-t d(y, x^)) / n_x^) ]
// where y^ is x's nearest point in the other cloud and n_y^ counts how many
// points picked y^ as their nearest. Counts are piecewise constant and are
// not differentiated.
LossValue dacd(std::span<const Vec3> pr, std::span<const Vec3> pgt, double temperature, bool with_gradient = true);

// (1/S) sum_i sum_{j<l in kNN(i)} | d(i,j) - d(i,l) |, S = |pr|.
LossValue uniformity_term(std::span<const Vec3> pr, int k, bool with_gradient = true);
// Inner pair sum of every point, before the 1/S normalization.
std::vector<double> uniformity_per_point(std::span<const Vec3> pr, int k);

// Selected composition; dacd_knn = dacd + alpha * uniformity_term.
LossValue evaluate(std::span<const Vec3> pr, std::span<const Vec3> pgt, const ObjectiveConfig& cfg,
                   bool with_gradient = true);

// Cloud overloads; both clouds must share a frame.
LossValue chamfer(const PointCloud& pr, const PointCloud& pgt);
LossValue extended_chamfer(const PointCloud& pr, const PointCloud& pgt);
LossValue dacd(const PointCloud& pr, const PointCloud& pgt, const ObjectiveConfig& cfg);
LossValue uniformity_term(const PointCloud& pr, int k);
LossValue evaluate(const PointCloud& pr, const PointCloud& pgt, const ObjectiveConfig& cfg);

ObjectiveConfig::Kind parse_kind(std::string_view name);
std::string to_string(ObjectiveConfig::Kind kind);

}  // namespace objective
}  // namespace shapefill
