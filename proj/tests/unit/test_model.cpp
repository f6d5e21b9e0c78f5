// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "shapefill/cloud.hpp"
#include "shapefill/model.hpp"
#include "shapefill/objective.hpp"

using namespace shapefill;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.group_in = 64;
  c.group_out = 16;
  c.n_proxies = 16;
  c.feat_dim = 16;
  c.n_enc_blocks = 1;
  c.n_dec_blocks = 1;
  c.n_heads = 2;
  c.knn_k = 4;
  c.n_queries = 2;
  c.fold_seed = 2;
  c.fold_radius = 0.05;
  return c;
}

PointCloud group_of(std::size_t n, std::uint64_t seed) {
  auto pts = oracle::random_points(n, seed);
  pts[0] = Vec3(0, 0, 0);
  pts[1] = Vec3(1, 1, 1);
  NormTransform t;
  return PointCloud(std::move(pts), t);
}

ad::Matrix random_rows(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  ad::Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.uniform(-1.0, 1.0);
  return m;
}

}  // namespace

TEST_CASE("desk defaults are valid and the budget factors") {
  ModelConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.n_queries * c.lattice_size() == 512);
  CHECK(c.group_out == 512);
}

TEST_CASE("invalid configs are rejected") {
  auto bad = [](auto mutate) {
    ModelConfig c;
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(bad([](ModelConfig& c) { c.group_out = 500; }).validate(), ValidationError);
  CHECK_THROWS_AS(bad([](ModelConfig& c) { c.n_heads = 3; }).validate(), ValidationError);
  CHECK_THROWS_AS(bad([](ModelConfig& c) { c.n_proxies = 2000; }).validate(), ValidationError);
  CHECK_THROWS_AS(bad([](ModelConfig& c) { c.knn_k = 128; }).validate(), ValidationError);
  CHECK_THROWS_AS(bad([](ModelConfig& c) { c.feat_dim = 0; }).validate(), ValidationError);
  CHECK_THROWS_AS(bad([](ModelConfig& c) { c.fold_radius = -1; }).validate(), ValidationError);
}

TEST_CASE("farthest point sampling on cube corners picks the opposite corner") {
  std::vector<Vec3> corners;
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) corners.emplace_back(x, y, z);
  const auto f = model::farthest_point_sampling(corners, 2, 0);
  CHECK(f[1] == 7);
}

TEST_CASE("farthest point sampling matches the brute-force oracle") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto pts = oracle::random_points(300, s);
    CHECK(model::farthest_point_sampling(pts, 40, s * 7 % 300) == oracle::fps(pts, 40, s * 7 % 300));
  }
}

TEST_CASE("exhaustive farthest point sampling is a permutation, duplicates included") {
  auto pts = oracle::random_points(50, 3);
  pts[10] = pts[20];
  auto f = model::farthest_point_sampling(pts, 50, 4);
  std::sort(f.begin(), f.end());
  std::vector<std::size_t> all(50);
  std::iota(all.begin(), all.end(), 0);
  CHECK(f == all);
}

TEST_CASE("parameters are seeded, shaped and checked") {
  const ModelConfig cfg = small_config();
  const ModelParams a = model::init_params(cfg, 1);
  const ModelParams b = model::init_params(cfg, 1);
  CHECK_NOTHROW(a.check());
  CHECK(a.tensors == b.tensors);
  CHECK(model::init_params(cfg, 2).tensors != a.tensors);
  CHECK(a.at("qg.c.b2").minCoeff() >= 0.2);
  CHECK(a.at("qg.c.b2").maxCoeff() <= 0.8);
  CHECK(a.at("enc0.ln1.gain").isOnes());

  ModelParams c = a;
  c.at("proxy.w1")(0, 0) = std::nan("");
  CHECK_THROWS_AS(c.check(), ValidationError);
  c = a;
  c.tensors["proxy.w1"] = ad::Matrix::Zero(2, 2);
  CHECK_THROWS_AS(c.check(), ValidationError);
  c = a;
  c.tensors.erase("fold2.b3");
  CHECK_THROWS_AS(c.check(), ValidationError);
}

TEST_CASE("proxy extraction") {
  const ModelConfig cfg = small_config();
  const ModelParams p = model::init_params(cfg, 3);
  const PointCloud g = group_of(cfg.group_in, 5);
  const Proxies a = model::extract_proxies(g, p, 9);
  CHECK(a.centers.rows() == 16);
  CHECK(a.features.cols() == 16);
  for (Eigen::Index i = 0; i < a.centers.rows(); ++i) {
    CHECK(a.centers.row(i).transpose() == g[a.center_indices[static_cast<std::size_t>(i)]]);
  }
  const Proxies b = model::extract_proxies(g, p, 9);
  CHECK(a.features == b.features);
  CHECK_THROWS_AS(model::extract_proxies(group_of(cfg.group_in - 1, 5), p, 9), ValidationError);
}

TEST_CASE("proxies equal to the group size are a permutation of the input") {
  ModelConfig cfg = small_config();
  cfg.n_proxies = cfg.group_in;
  const ModelParams p = model::init_params(cfg, 3);
  const Proxies a = model::extract_proxies(group_of(cfg.group_in, 5), p, 1);
  std::vector<std::size_t> idx = a.center_indices;
  std::sort(idx.begin(), idx.end());
  for (std::size_t i = 0; i < idx.size(); ++i) CHECK(idx[i] == i);
}

TEST_CASE("zeroed residual branches make the encoder an identity") {
  ModelConfig cfg = small_config();
  cfg.n_enc_blocks = 3;
  ModelParams p = model::init_params(cfg, 4);
  model::zero_residual_branches(p);
  const ad::Matrix centers = random_rows(16, 3, 1).cwiseAbs();
  const ad::Matrix feats = random_rows(16, 16, 2, 3.0);
  CHECK(model::encode(centers, feats, p) == feats);
}

TEST_CASE("encoder is equivariant to proxy order") {
  const ModelConfig cfg = small_config();
  const ModelParams p = model::init_params(cfg, 5);
  const ad::Matrix centers = random_rows(16, 3, 3).cwiseAbs();
  const ad::Matrix feats = random_rows(16, 16, 4);
  std::vector<int> perm(16);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[2], perm[9]);
  ad::Matrix pc(16, 3), pf(16, 16);
  for (int i = 0; i < 16; ++i) {
    pc.row(i) = centers.row(perm[i]);
    pf.row(i) = feats.row(perm[i]);
  }
  const ad::Matrix out = model::encode(centers, feats, p);
  const ad::Matrix pout = model::encode(pc, pf, p);
  for (int i = 0; i < 16; ++i) CHECK((pout.row(i) - out.row(perm[i])).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("encoder output respects the documented bound") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const ModelConfig cfg = small_config();
    ModelParams p = model::init_params(cfg, 100 + s);
    for (auto& [name, m] : p.tensors) m += random_rows(m.rows(), m.cols(), s * 31 + m.size(), 0.3);
    const ad::Matrix centers = random_rows(16, 3, s).cwiseAbs();
    const ad::Matrix feats = random_rows(16, 16, s + 1, 2.0);
    const ad::Matrix out = model::encode(centers, feats, p);
    CHECK(out.allFinite());
    const double bound = model::encoder_output_bound(p, feats.rowwise().norm().maxCoeff());
    CHECK(out.rowwise().norm().maxCoeff() <= bound);
  }
}

TEST_CASE("query generation is deterministic") {
  const ModelConfig cfg = small_config();
  const ModelParams p = model::init_params(cfg, 6);
  const ad::Matrix enc = random_rows(16, 16, 8);
  const Queries a = model::generate_queries(enc, p);
  const Queries b = model::generate_queries(enc, p);
  CHECK(a.coarse_centers == b.coarse_centers);
  CHECK(a.features == b.features);
  CHECK(a.coarse_centers.rows() == 2);
  CHECK(a.coarse_centers.cols() == 3);
}

TEST_CASE("zero folding offsets give translated seed lattices") {
  ModelConfig cfg = small_config();
  cfg.fold_radius = 0.1;
  ModelParams p = model::init_params(cfg, 7);
  model::zero_fold_offsets(p);

  ad::Matrix origin = ad::Matrix::Zero(2, 3);
  const ad::Matrix out = model::fold3d(origin, random_rows(2, 16, 1), p);
  REQUIRE(out.rows() == 16);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (int a = 0; a < 3; ++a) CHECK(std::abs(out(r, a)) == 0.1);
  }

  const ad::Matrix centers = random_rows(2, 3, 2);
  const ad::Matrix moved = model::fold3d(centers, random_rows(2, 16, 3), p);
  const ad::Matrix seed = model::seed_lattice(cfg);
  for (Eigen::Index q = 0; q < 2; ++q) {
    for (Eigen::Index j = 0; j < 8; ++j) {
      for (int a = 0; a < 3; ++a) CHECK(moved(q * 8 + j, a) == centers(q, a) + seed(j, a));
    }
  }
}

TEST_CASE("seed lattice spans the fold radius") {
  ModelConfig cfg;
  const ad::Matrix s = model::seed_lattice(cfg);
  CHECK(s.rows() == 64);
  CHECK(s.minCoeff() == -cfg.fold_radius);
  CHECK(s.maxCoeff() == cfg.fold_radius);
  cfg.fold_seed = 1;
  cfg.group_out = cfg.n_queries;
  CHECK(model::seed_lattice(cfg).isZero());
}

TEST_CASE("forward output size over a config sweep") {
  std::vector<ModelConfig> sweep;
  for (std::size_t s : {1, 2, 3}) {
    for (std::size_t q : {1, 4}) {
      for (std::size_t heads : {1, 2}) {
        ModelConfig c = small_config();
        c.fold_seed = s;
        c.n_queries = q;
        c.group_out = q * s * s * s;
        c.n_heads = heads;
        c.n_enc_blocks = heads;
        c.n_dec_blocks = 3 - heads;
        sweep.push_back(c);
      }
    }
  }
  ModelConfig wide = small_config();
  wide.group_in = 100;
  wide.n_proxies = 33;
  wide.knn_k = 32;
  sweep.push_back(wide);
  CHECK(sweep.size() >= 12);
  for (const ModelConfig& c : sweep) {
    REQUIRE_NOTHROW(c.validate());
    const ModelParams p = model::init_params(c, 11);
    const PointCloud out = model::forward(group_of(c.group_in, 2), p, 3);
    CHECK(out.size() == c.group_out);
    CHECK(out.frame() == Frame::normalized);
  }
}

TEST_CASE("forward is deterministic and rejects world-frame input") {
  const ModelConfig cfg = small_config();
  const ModelParams p = model::init_params(cfg, 12);
  const PointCloud g = group_of(cfg.group_in, 4);
  const PointCloud a = model::forward(g, p, 5);
  const PointCloud b = model::forward(g, p, 5);
  CHECK(std::equal(a.points().begin(), a.points().end(), b.points().begin()));
  CHECK_THROWS_AS(model::forward(PointCloud(oracle::random_points(cfg.group_in, 1)), p, 5), ValidationError);
}

TEST_CASE("outputs stay finite over many random parameter draws") {
  ModelConfig cfg = small_config();
  cfg.group_in = 32;
  cfg.n_proxies = 8;
  cfg.feat_dim = 8;
  const PointCloud g = group_of(cfg.group_in, 6);
  bool finite = true;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const ModelParams p = model::init_params(cfg, s);
    const PointCloud out = model::forward(g, p, s);
    for (const Vec3& x : out.points()) finite = finite && x.allFinite();
  }
  CHECK(finite);
}

TEST_CASE("non-finite parameters trip the divergence guard") {
  const ModelConfig cfg = small_config();
  ModelParams p = model::init_params(cfg, 1);
  p.at("fold2.b3")(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(model::forward(group_of(cfg.group_in, 1), p, 1), DivergenceError);
}

TEST_CASE("end-to-end directional derivative matches finite differences") {
  const ModelConfig cfg = small_config();
  const ModelParams base = model::init_params(cfg, 21);
  const PointCloud g = group_of(cfg.group_in, 22);
  const auto target = oracle::random_points(cfg.group_out, 23);
  ObjectiveConfig ocfg;
  ocfg.kind = ObjectiveConfig::Kind::cd;

  auto loss = [&](const ModelParams& p) {
    const PointCloud out = model::forward(g, p, 1);
    return objective::evaluate(out.points(), target, ocfg, false).value;
  };

  ad::Tape tape;
  model::Graph graph(tape, base);
  ad::Var out = graph.forward(g.points(), 1);
  std::vector<Vec3> pts;
  for (Eigen::Index r = 0; r < out.rows(); ++r) pts.emplace_back(out.value()(r, 0), out.value()(r, 1), out.value()(r, 2));
  const LossValue lv = objective::evaluate(pts, target, ocfg);
  ad::Matrix seed(out.rows(), 3);
  for (Eigen::Index r = 0; r < out.rows(); ++r) seed.row(r) = lv.gradient[static_cast<std::size_t>(r)].transpose();
  tape.backward(out, seed);
  const auto grads = graph.gradients();

  for (const std::string name : {"fold2.w3", "dec0.ca.wv", "enc0.attn.wq", "proxy.w1", "qg.c.w2"}) {
    CAPTURE(name);
    // Direction scaled to the tensor so the probe stays local for small-initialized layers.
    const ad::Matrix dir =
        random_rows(base.at(name).rows(), base.at(name).cols(), 99, base.at(name).cwiseAbs().maxCoeff());
    const double analytic = grads.at(name).cwiseProduct(dir).sum();
    const double h = 1e-5;
    ModelParams up = base, down = base;
    up.at(name) += h * dir;
    down.at(name) -= h * dir;
    const double fd = (loss(up) - loss(down)) / (2 * h);
    CHECK(std::abs(analytic - fd) <= 1e-2 * std::max(std::abs(fd), 1e-8));
  }
}
