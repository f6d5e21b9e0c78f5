// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "doctest.h"
#include "shapefill/data.hpp"
#include "shapefill/pipeline.hpp"
#include "shapefill/random.hpp"

using namespace shapefill;
namespace fs = std::filesystem;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.group_in = 64;
  c.group_out = 32;
  c.n_proxies = 16;
  c.feat_dim = 16;
  c.n_enc_blocks = 1;
  c.n_dec_blocks = 1;
  c.n_heads = 2;
  c.knn_k = 4;
  c.n_queries = 4;
  c.fold_seed = 2;
  return c;
}

const ModelParams& params() {
  static const ModelParams p = model::init_params(small_config(), 3);
  return p;
}

PhantomSpec small_spec(std::uint64_t seed, double radius = 8.0, int grid = 24) {
  PhantomSpec s;
  s.grid = grid;
  s.radius = radius;
  s.thickness = 2;
  s.seed = seed;
  return s;
}

PipelineConfig base_config(std::uint64_t seed = 7) {
  PipelineConfig c;
  c.seed = seed;
  return c;
}

bool same(const ReconstructionResult& a, const ReconstructionResult& b) {
  return a.defect_volume == b.defect_volume && std::ranges::equal(a.defect_cloud.points(), b.defect_cloud.points());
}

}  // namespace

TEST_CASE("reconstruction never overlaps the input") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Phantom ph = data::make_phantom(small_spec(seed));
    const ReconstructionResult r = pipeline::complete_case(ph.defective, params(), base_config(seed), "c");
    CHECK(r.defect_volume.same_grid(ph.defective));
    for (std::size_t i = 0; i < r.defect_volume.size(); ++i) REQUIRE_FALSE((r.defect_volume.at(i) && ph.defective.at(i)));
    CHECK(r.empty == (r.defect_volume.count() == 0));
  }
}

TEST_CASE("provenance records the iteration seeds") {
  const Phantom ph = data::make_phantom(small_spec(1));
  PipelineConfig cfg = base_config(99);
  cfg.refinements = 3;
  const ReconstructionResult r = pipeline::complete_case(ph.defective, params(), cfg, "p");
  const Provenance& p = r.provenance;
  CHECK(p.seed == 99);
  CHECK(p.refinements == 3);
  CHECK(p.input_points == ph.defective.count());
  REQUIRE(p.iterations.size() == 3);
  CHECK_FALSE(p.iterations[0].jitter_seed);
  std::size_t groups = 0;
  for (std::size_t m = 0; m < 3; ++m) {
    CHECK(p.iterations[m].split_seed == derive_seed(99, 2 * m));
    if (m > 0) CHECK(p.iterations[m].jitter_seed == derive_seed(99, 2 * m + 1));
    const std::size_t n = p.input_points;
    CHECK(p.iterations[m].groups == (n + 63) / 64);
    CHECK(p.iterations[m].groups * 64 == n + p.iterations[m].padding);
    groups += p.iterations[m].groups;
  }
  CHECK(p.predicted_points == groups * 32);
  CHECK(r.defect_cloud.size() == p.predicted_points);
  CHECK(p.peak_tracked_bytes > 0);
  CHECK(p.seconds > 0.0);
}

TEST_CASE("reconstruction is deterministic in the seed") {
  const Phantom ph = data::make_phantom(small_spec(2));
  const auto a = pipeline::complete_case(ph.defective, params(), base_config(5));
  const auto b = pipeline::complete_case(ph.defective, params(), base_config(5));
  const auto c = pipeline::complete_case(ph.defective, params(), base_config(6));
  CHECK(same(a, b));
  CHECK_FALSE(std::ranges::equal(a.defect_cloud.points(), c.defect_cloud.points()));
}

TEST_CASE("more refinements add predictions") {
  const Phantom ph = data::make_phantom(small_spec(2));
  PipelineConfig one = base_config(), three = base_config();
  one.refinements = 1;
  three.refinements = 3;
  const auto a = pipeline::complete_case(ph.defective, params(), one);
  const auto b = pipeline::complete_case(ph.defective, params(), three);
  CHECK(b.provenance.predicted_points == 3 * a.provenance.predicted_points);
  // The first pass is shared.
  const auto pa = a.defect_cloud.points();
  const auto pb = b.defect_cloud.points();
  CHECK(std::equal(pa.begin(), pa.end(), pb.begin()));
}

TEST_CASE("budget and config validation") {
  const Phantom ph = data::make_phantom(small_spec(0));
  PipelineConfig cfg = base_config();
  cfg.group_in = 128;
  CHECK_THROWS_AS(pipeline::complete_case(ph.defective, params(), cfg), ValidationError);
  cfg = base_config();
  cfg.group_in = 64;
  cfg.group_out = 32;
  CHECK_NOTHROW(pipeline::complete_case(ph.defective, params(), cfg));
  cfg = base_config();
  cfg.refinements = 0;
  CHECK_THROWS_AS(pipeline::complete_case(ph.defective, params(), cfg), ValidationError);
  cfg = base_config();
  cfg.jitter_sigma = -1.0;
  CHECK_THROWS_AS(pipeline::complete_case(ph.defective, params(), cfg), ValidationError);
  const VoxelVolume empty({8, 8, 8}, Vec3::Ones(), Vec3::Zero());
  CHECK_THROWS_AS(pipeline::complete_case(empty, params(), base_config()), ValidationError);
}

TEST_CASE("tiny inputs are padded to a full group") {
  VoxelVolume v({8, 8, 8}, Vec3::Ones(), Vec3::Zero());
  v.set(3, 3, 3, true);
  v.set(4, 3, 3, true);
  v.set(4, 4, 3, true);
  const auto r = pipeline::complete_case(v, params(), base_config());
  CHECK(r.provenance.iterations[0].groups == 1);
  CHECK(r.provenance.iterations[0].padding == 61);
}

TEST_CASE("optional mesh output") {
  const Phantom ph = data::make_phantom(small_spec(4));
  PipelineConfig cfg = base_config();
  const auto plain = pipeline::complete_case(ph.defective, params(), cfg);
  CHECK_FALSE(plain.mesh);
  cfg.mesh = true;
  const auto meshed = pipeline::complete_case(ph.defective, params(), cfg);
  CHECK(same(plain, meshed));
  if (!meshed.empty) {
    REQUIRE(meshed.mesh);
    CHECK_FALSE(meshed.mesh->triangles.empty());
  }
}

TEST_CASE("tracked memory does not grow with the input size") {
  PipelineConfig cfg = base_config();
  cfg.refinements = 1;
  const Phantom small = data::make_phantom(small_spec(1, 8.0, 24));
  const Phantom large = data::make_phantom(small_spec(1, 20.0, 48));
  REQUIRE(large.defective.count() > 5 * small.defective.count());
  const auto a = pipeline::complete_case(small.defective, params(), cfg);
  const auto b = pipeline::complete_case(large.defective, params(), cfg);
  const double pa = static_cast<double>(a.provenance.peak_tracked_bytes);
  const double pb = static_cast<double>(b.provenance.peak_tracked_bytes);
  CHECK(std::abs(pb - pa) <= 0.1 * pa);
}

TEST_CASE("batch results do not depend on the worker count") {
  std::vector<CaseInput> cases;
  for (std::uint64_t i = 0; i < 4; ++i) {
    cases.push_back({"case" + std::to_string(i), {}, data::make_phantom(small_spec(i)).defective});
  }
  const fs::path dir = fs::temp_directory_path() / "shapefill_test_pipeline";
  fs::create_directories(dir);
  const fs::path corrupt = dir / "corrupt.nrrd";
  std::ofstream(corrupt) << "not a volume";
  cases.push_back({"corrupt", corrupt, std::nullopt});
  cases.push_back({"missing", dir / "missing.nrrd", std::nullopt});

  const PipelineConfig cfg = base_config(21);
  const auto serial = pipeline::complete_batch(cases, params(), cfg, 1);
  const auto parallel = pipeline::complete_batch(cases, params(), cfg, 3);
  REQUIRE(serial.size() == cases.size());
  REQUIRE(parallel.size() == cases.size());
  for (std::size_t i = 0; i < 4; ++i) {
    CAPTURE(i);
    CHECK(serial[i].id == cases[i].id);
    REQUIRE(serial[i].result);
    REQUIRE(parallel[i].result);
    CHECK(same(*serial[i].result, *parallel[i].result));
    CHECK(serial[i].result->provenance.seed == (21 ^ i));
    PipelineConfig single = cfg;
    single.seed = 21 ^ i;
    CHECK(same(*serial[i].result, pipeline::complete_case(*cases[i].volume, params(), single)));
  }
  // Malformed content is a validation error; an unreadable file is an I/O error.
  CHECK_FALSE(serial[4].result);
  CHECK(serial[4].exit_code == 3);
  CHECK(parallel[4].exit_code == 3);
  CHECK_FALSE(serial[5].result);
  CHECK(serial[5].exit_code == 2);
  CHECK(parallel[5].exit_code == 2);
  CHECK_FALSE(serial[5].error.empty());
}

TEST_CASE("report json") {
  const Phantom ph = data::make_phantom(small_spec(3));
  PipelineConfig cfg = base_config(11);
  cfg.refinements = 2;
  const auto r = pipeline::complete_case(ph.defective, params(), cfg, "case_x");
  const auto doc = nlohmann::json::parse(pipeline::report_json(r));
  CHECK(doc["id"] == "case_x");
  CHECK(doc["defect_voxels"] == r.defect_volume.count());
  CHECK(doc["provenance"]["seed"] == 11);
  CHECK(doc["provenance"]["iterations"].size() == 2);
  CHECK(doc["provenance"]["iterations"][0]["jitter_seed"].is_null());
  CHECK(doc["provenance"]["iterations"][1]["jitter_seed"] == derive_seed(11, 3));
  CHECK(doc["mesh_triangles"].is_null());
}
