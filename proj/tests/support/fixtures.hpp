// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

// Random instances shared by unit and acceptance tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "oracles.hpp"
#include "shapefill/objective.hpp"

namespace fixture {

using shapefill::Vec3;

// Central differences are only meaningful away from the kinks of the
// piecewise-smooth objectives: nearest-neighbor switches, kNN membership
// changes, |a - b| at a == b and the max in the extended chamfer.
struct Genericity {
  double margin = 5e-4;
};

inline bool nn_margin_ok(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double margin) {
  for (const Vec3& p : a) {
    double d1 = 1e300, d2 = 1e300;
    for (const Vec3& q : b) {
      const double d = std::sqrt(oracle::sq(p, q));
      if (d < d1) {
        d2 = d1;
        d1 = d;
      } else if (d < d2) {
        d2 = d;
      }
    }
    if (d2 - d1 < margin) return false;
  }
  return true;
}

inline bool knn_margin_ok(const std::vector<Vec3>& a, std::size_t k, double margin) {
  const oracle::BruteKnn nn = oracle::knn(a, a, k + 1, true);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (nn.dist[i][k] - nn.dist[i][k - 1] < margin) return false;
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t l = j + 1; l < k; ++l) {
        if (std::abs(nn.dist[i][j] - nn.dist[i][l]) < margin) return false;
      }
    }
  }
  return true;
}

inline bool is_generic(const std::vector<Vec3>& pr, const std::vector<Vec3>& gt,
                       shapefill::ObjectiveConfig::Kind kind, int k, double margin) {
  using Kind = shapefill::ObjectiveConfig::Kind;
  if (!nn_margin_ok(pr, gt, margin) || !nn_margin_ok(gt, pr, margin)) return false;
  if (kind == Kind::ecd) {
    double s1 = 0.0, s2 = 0.0;
    for (const Vec3& p : pr) s1 += std::sqrt(oracle::sq(p, gt[oracle::nearest(p, gt)]));
    for (const Vec3& p : gt) s2 += std::sqrt(oracle::sq(p, pr[oracle::nearest(p, pr)]));
    if (std::abs(s1 / pr.size() - s2 / gt.size()) < 10 * margin) return false;
  }
  if (kind == Kind::dacd_knn && !knn_margin_ok(pr, static_cast<std::size_t>(k), margin)) return false;
  return true;
}

struct Pair {
  std::vector<Vec3> pr;
  std::vector<Vec3> gt;
};

// Rejection-sampled cloud pair on which `kind` is differentiable with margin.
inline Pair generic_pair(std::size_t n, std::uint64_t seed, shapefill::ObjectiveConfig::Kind kind, int k = 4,
                         Genericity g = {}) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    const std::uint64_t s = seed * 1000003ULL + attempt;
    Pair p{oracle::random_points(n, 2 * s + 1), oracle::random_points(n, 2 * s + 2)};
    if (is_generic(p.pr, p.gt, kind, k, g.margin)) return p;
  }
}

// Reconstruction close to a bijective match of the target.
inline Pair matched_pair(std::size_t n, std::uint64_t seed, double noise = 0.01) {
  Pair p;
  p.gt = oracle::random_points(n, seed);
  shapefill::Rng rng(seed ^ 0x5bd1e995ULL);
  for (const Vec3& q : p.gt) p.pr.push_back(q + noise * Vec3(rng.normal(), rng.normal(), rng.normal()));
  return p;
}

}  // namespace fixture
