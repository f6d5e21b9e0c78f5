// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "shapefill/cloud.hpp"
#include "shapefill/objective.hpp"

using namespace shapefill;
using Kind = ObjectiveConfig::Kind;

namespace {

std::vector<Vec3> lattice(int n, double step) {
  std::vector<Vec3> out;
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) out.emplace_back(x * step, y * step, z * step);
  return out;
}

}  // namespace

TEST_CASE("chamfer fixtures and oracle") {
  const std::vector<Vec3> a{Vec3(0, 0, 0)}, b{Vec3(1, 0, 0)};
  CHECK(objective::chamfer(a, b).value == 2.0);
  CHECK(objective::chamfer(a, a).value == 0.0);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto p = oracle::random_points(64, s), q = oracle::random_points(64, s + 50);
    CHECK(objective::chamfer(p, q).value == doctest::Approx(oracle::chamfer(p, q)).epsilon(1e-12));
  }
}

TEST_CASE("extended chamfer fixtures and oracle") {
  const std::vector<Vec3> a{Vec3(0, 0, 0)}, b{Vec3(1, 0, 0), Vec3(0, 0, 0)};
  CHECK(objective::extended_chamfer(a, b).value == 0.5);
  CHECK(objective::extended_chamfer(b, b).value == 0.0);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto p = oracle::random_points(64, s), q = oracle::random_points(48, s + 50);
    CHECK(objective::extended_chamfer(p, q).value ==
          doctest::Approx(oracle::extended_chamfer(p, q)).epsilon(1e-12));
  }
}

TEST_CASE("dacd fixtures and oracle") {
  const auto p = oracle::random_points(64, 3);
  CHECK(objective::dacd(p, p, 1.0).value == 0.0);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto a = oracle::random_points(64, s), b = oracle::random_points(40, s + 50);
    for (double t : {1.0, 5.0}) {
      const double v = objective::dacd(a, b, t).value;
      CHECK(v == doctest::Approx(oracle::dacd(a, b, t)).epsilon(1e-12));
      CHECK(v >= 0.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("dacd penalizes collapsing onto one target") {
  const std::vector<Vec3> gt{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  const Vec3 d(0, 0.1, 0);
  const std::vector<Vec3> spread{gt[0] + d, gt[1] + d};
  const std::vector<Vec3> collapsed{gt[0] + d, gt[0] - d};
  CHECK(oracle::dacd(collapsed, gt, 1.0) > oracle::dacd(spread, gt, 1.0));
  CHECK(objective::dacd(collapsed, gt, 1.0).value > objective::dacd(spread, gt, 1.0).value);
}

TEST_CASE("dacd grows when a matched point is duplicated") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    fixture::Pair p = fixture::matched_pair(64, s);
    const double before = objective::dacd(p.pr, p.gt, 1.0).value;
    p.pr.push_back(p.pr[s % p.pr.size()]);
    CHECK(objective::dacd(p.pr, p.gt, 1.0).value > before);
  }
}

TEST_CASE("uniformity term fixtures") {
  // Equilateral with exactly representable side lengths sqrt(2).
  const std::vector<Vec3> tri{Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  CHECK(objective::uniformity_term(tri, 2).value == 0.0);

  const std::vector<Vec3> line{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(3, 0, 0)};
  CHECK(std::abs(objective::uniformity_term(line, 2).value - 4.0 / 3.0) < 1e-12);

  // Interior point of a lattice has six equidistant neighbors.
  const auto l = lattice(3, 0.25);
  const KnnResult nn = neighbors::knn(l, l, 6, true);
  for (std::size_t j = 0; j < 6; ++j) CHECK(nn.distance(13, j) == 0.25);

  CHECK_THROWS_AS(objective::uniformity_term(line, 3), ValidationError);
}

TEST_CASE("uniformity term on a regular lattice interior is zero") {
  const auto l = lattice(5, 0.25);
  const auto per_point = objective::uniformity_per_point(l, 6);
  for (int z = 1; z < 4; ++z)
    for (int y = 1; y < 4; ++y)
      for (int x = 1; x < 4; ++x) CHECK(per_point[static_cast<std::size_t>(x + 5 * (y + 5 * z))] == 0.0);
  // A 2x2x2 cube has no interior, yet every corner sees its three axis neighbors equally.
  CHECK(objective::uniformity_term(lattice(2, 0.5), 3).value == 0.0);
}

TEST_CASE("uniformity term matches oracle and is rigid-invariant") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto p = oracle::random_points(64, s + 7);
    const double v = objective::uniformity_term(p, 4).value;
    CHECK(v == doctest::Approx(oracle::uniformity(p, 4)).epsilon(1e-12));
    Eigen::Matrix3d r = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    std::vector<Vec3> moved;
    for (const Vec3& x : p) moved.push_back(r * x + Vec3(5, -2, 1));
    CHECK(objective::uniformity_term(moved, 4).value == doctest::Approx(v).epsilon(1e-9));
  }
}

TEST_CASE("composite objective") {
  const auto a = oracle::random_points(64, 1), b = oracle::random_points(64, 2);
  ObjectiveConfig cfg;
  cfg.alpha = 0.0;
  CHECK(objective::evaluate(a, b, cfg).value == objective::dacd(a, b, 1.0).value);
  cfg.alpha = 0.3;
  CHECK(objective::evaluate(a, b, cfg).value ==
        doctest::Approx(objective::dacd(a, b, 1.0).value + 0.3 * objective::uniformity_term(a, 4).value));
  const auto l = lattice(3, 0.5);
  for (Kind k : {Kind::cd, Kind::ecd, Kind::dacd}) {
    cfg.kind = k;
    CHECK(objective::evaluate(l, l, cfg).value == 0.0);
  }
}

TEST_CASE("objectives are permutation invariant") {
  auto a = oracle::random_points(64, 5);
  const auto b = oracle::random_points(64, 6);
  ObjectiveConfig cfg;
  std::vector<double> before;
  for (Kind k : {Kind::cd, Kind::ecd, Kind::dacd, Kind::dacd_knn}) {
    cfg.kind = k;
    before.push_back(objective::evaluate(a, b, cfg, false).value);
  }
  std::reverse(a.begin(), a.end());
  std::size_t i = 0;
  for (Kind k : {Kind::cd, Kind::ecd, Kind::dacd, Kind::dacd_knn}) {
    cfg.kind = k;
    CHECK(std::abs(objective::evaluate(a, b, cfg, false).value - before[i++]) <= 1e-12);
  }
}

TEST_CASE("analytic gradients match central differences") {
  for (Kind kind : {Kind::cd, Kind::ecd, Kind::dacd, Kind::dacd_knn}) {
    ObjectiveConfig cfg;
    cfg.kind = kind;
    cfg.alpha = 1.0;
    for (std::uint64_t s = 0; s < 3; ++s) {
      const fixture::Pair p = fixture::generic_pair(64, s, kind);
      const LossValue lv = objective::evaluate(p.pr, p.gt, cfg);
      const auto fd = oracle::finite_gradient(
          [&](const std::vector<Vec3>& x) { return objective::evaluate(x, p.gt, cfg, false).value; }, p.pr, 1e-4);
      CHECK(oracle::relative_error(lv.gradient, fd) < 1e-3);
    }
  }
}

TEST_CASE("config validation and kind names") {
  ObjectiveConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.k = 1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.temperature = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.alpha = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  for (Kind k : {Kind::cd, Kind::ecd, Kind::dacd, Kind::dacd_knn}) {
    CHECK(objective::parse_kind(objective::to_string(k)) == k);
  }
  CHECK_THROWS_AS(objective::parse_kind("emd"), ValidationError);
}

TEST_CASE("cloud overloads require matching frames") {
  const PointCloud a = cloud::normalize(PointCloud(oracle::random_points(20, 1)));
  const PointCloud b = cloud::normalize(PointCloud(oracle::random_points(20, 2)));
  CHECK_NOTHROW(objective::chamfer(a, a));
  CHECK_THROWS_AS(objective::chamfer(a, PointCloud(oracle::random_points(20, 2))), ValidationError);
  CHECK(objective::chamfer(a, b).value >= 0.0);
  CHECK_THROWS_AS(objective::chamfer(std::vector<Vec3>{}, oracle::random_points(3, 1)), ValidationError);
}
