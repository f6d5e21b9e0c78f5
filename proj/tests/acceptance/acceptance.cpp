// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "shapefill/cloud.hpp"
#include "shapefill/data.hpp"
#include "shapefill/metrics.hpp"
#include "shapefill/model.hpp"
#include "shapefill/neighbors.hpp"
#include "shapefill/objective.hpp"
#include "shapefill/pipeline.hpp"
#include "shapefill/random.hpp"
#include "shapefill/train.hpp"

using namespace shapefill;
using Kind = ObjectiveConfig::Kind;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool disjoint(const VoxelVolume& a, const VoxelVolume& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.at(i) && b.at(i)) return false;
  }
  return true;
}

bool same(const ReconstructionResult& a, const ReconstructionResult& b) {
  return a.defect_volume == b.defect_volume && std::ranges::equal(a.defect_cloud.points(), b.defect_cloud.points());
}

// Completions produced anywhere in this run, checked for overlap in criterion 8.
std::size_t g_completions = 0;
std::size_t g_overlapping = 0;

ReconstructionResult complete(const VoxelVolume& defective, const ModelParams& params, const PipelineConfig& cfg) {
  ReconstructionResult r = pipeline::complete_case(defective, params, cfg);
  ++g_completions;
  if (!disjoint(r.defect_volume, defective)) ++g_overlapping;
  return r;
}

Outcome knn_oracle() {
  double seconds = 0.0;
  std::size_t mismatches = 0, largest = 0;
  Rng rng(1);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const std::size_t k = std::array<std::size_t, 3>{1, 4, 8}[i % 3];
    const std::size_t nq = i == 0 ? 5000 : 50 + rng.index(1500);
    const bool self = i % 2 == 0;
    const std::size_t nr = self ? nq : (i == 1 ? 5000 : 50 + rng.index(3000));
    auto q = oracle::random_points(nq, 100 + i);
    auto r = self ? q : oracle::random_points(nr, 200 + i);
    // Exact duplicates exercise the tie-break.
    for (std::size_t j = 0; j < std::min<std::size_t>(nr / 10, 20); ++j) r[nr - 1 - j] = r[j];
    if (self) q = r;
    largest = std::max({largest, nq, nr});
    const oracle::BruteKnn ref = oracle::knn(q, r, k, self);
    for (std::size_t chunk : {1, 64, 4096}) {
      const auto t0 = Clock::now();
      const KnnResult got = neighbors::knn(q, r, k, self, {chunk, chunk});
      seconds += since(t0);
      for (std::size_t a = 0; a < q.size(); ++a) {
        for (std::size_t j = 0; j < k; ++j) {
          if (got.index(a, j) != ref.idx[a][j] || got.distance(a, j) != ref.dist[a][j]) ++mismatches;
        }
      }
    }
  }
  return {mismatches == 0 && seconds < 10.0 && largest <= 5000,
          fmt("20 instances x 3 chunk sizes, %zu mismatches, knn time %.2f s", mismatches, seconds)};
}

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  std::string detail;
  bool pass = true;
  for (Kind kind : {Kind::cd, Kind::ecd, Kind::dacd, Kind::dacd_knn}) {
    ObjectiveConfig cfg;
    cfg.kind = kind;
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const fixture::Pair p = fixture::generic_pair(64, 1000 + s, kind);
      const LossValue lv = objective::evaluate(p.pr, p.gt, cfg);
      const auto fd = oracle::finite_gradient(
          [&](const std::vector<Vec3>& x) { return objective::evaluate(x, p.gt, cfg, false).value; }, p.pr, 1e-4);
      worst = std::max(worst, oracle::relative_error(lv.gradient, fd));
    }
    pass = pass && worst < 1e-3;
    detail += fmt("%s %.1e, ", objective::to_string(kind).c_str(), worst);
  }
  const double seconds = since(t0);
  return {pass && seconds < 60.0, detail + fmt("%.1f s", seconds)};
}

std::vector<Vec3> lattice(int n, double h) {
  std::vector<Vec3> p;
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) p.emplace_back(h * x, h * y, h * z);
  return p;
}

Outcome uniformity_fixtures() {
  const std::vector<Vec3> tri{Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  const double triangle = objective::uniformity_term(tri, 2).value;

  const auto l = lattice(5, 0.25);
  const auto per_point = objective::uniformity_per_point(l, 6);
  double interior = 0.0;
  for (int z = 1; z < 4; ++z)
    for (int y = 1; y < 4; ++y)
      for (int x = 1; x < 4; ++x) interior = std::max(interior, per_point[static_cast<std::size_t>(x + 5 * (y + 5 * z))]);

  const std::vector<Vec3> line{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(3, 0, 0)};
  const double collinear = objective::uniformity_term(line, 2).value;
  return {triangle == 0.0 && interior == 0.0 && std::abs(collinear - 4.0 / 3.0) <= 1e-12,
          fmt("triangle %g, lattice interior max %g, collinear %.15f", triangle, interior, collinear)};
}

Outcome metrics_oracles() {
  Rng rng(4);
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Shape3 shape{4 + static_cast<int>(rng.index(29)), 4 + static_cast<int>(rng.index(29)),
                       4 + static_cast<int>(rng.index(29))};
    const Vec3 spacing(rng.uniform(0.3, 2.0), rng.uniform(0.3, 2.0), rng.uniform(0.3, 2.0));
    const VoxelVolume p = oracle::random_volume(shape, rng.uniform(0.02, 0.2), 300 + s, spacing);
    const VoxelVolume g = oracle::random_volume(shape, rng.uniform(0.02, 0.2), 400 + s, spacing);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    worst = std::max(worst, rel(metrics::dice(p, g), oracle::dice_sets(p, g)));
    worst = std::max(worst, rel(metrics::boundary_dice(p, g), oracle::boundary_dice(p, g, 1)));
    worst = std::max(worst, rel(metrics::hausdorff95(p, g), oracle::hd95(p, g)));
    worst = std::max(worst, rel(metrics::chamfer_mm(p, g), oracle::chamfer_mm(p, g)));
  }

  auto slab = [](int x0, int x1) {
    VoxelVolume v({8, 8, 8}, Vec3::Ones(), Vec3::Zero());
    for (int z = 0; z < 8; ++z)
      for (int y = 0; y < 8; ++y)
        for (int x = x0; x < x1; ++x) v.set(x, y, z, true);
    return v;
  };
  const double half = metrics::dice(slab(0, 4), slab(2, 6));
  VoxelVolume a({8, 1, 1}, Vec3::Ones(), Vec3::Zero()), b = a;
  a.set(0, 0, 0, true);
  b.set(5, 0, 0, true);
  const double hd = metrics::hausdorff95(a, b);
  return {worst <= 1e-9 && half == 0.5 && hd == 5.0,
          fmt("20 random pairs, max deviation %.1e; half-overlap DSC %g; HD95 %g mm", worst, half, hd)};
}

// Shared by the overfit and refinement criteria.
struct Trained {
  ModelParams params;
  std::vector<Phantom> phantoms;
  double initial = 0.0;
  double final = 0.0;
  double seconds = 0.0;
};

const Trained& trained() {
  static const Trained t = [] {
    Trained out;
    PhantomSpec base;
    base.seed = 1;
    std::vector<TrainSample> samples;
    for (std::size_t i = 0; i < 8; ++i) {
      out.phantoms.push_back(data::make_phantom(data::phantom_spec(base, i)));
      samples.push_back(train::make_sample(out.phantoms.back().defective, out.phantoms.back().defect,
                                           "case_" + std::to_string(i)));
    }
    const ModelConfig model;
    TrainConfig tc;
    tc.augment = {};
    ObjectiveConfig objective;
    objective.kind = Kind::cd;
    TrainState state = train::initial_state(model, derive_seed(1, 1));
    const auto t0 = Clock::now();
    out.initial = train::evaluate_objective(state.params, samples, objective, derive_seed(1, 3));
    train::run(state, samples, tc, objective, derive_seed(1, 2));
    out.final = train::evaluate_objective(state.params, samples, objective, derive_seed(1, 3));
    out.seconds = since(t0);
    out.params = std::move(state.params);
    return out;
  }();
  return t;
}

Outcome overfit() {
  const Trained& t = trained();
  PipelineConfig cfg;
  cfg.seed = 5;
  double dsc = 0.0;
  for (const Phantom& ph : t.phantoms) dsc += metrics::dice(complete(ph.defective, t.params, cfg).defect_volume, ph.defect);
  dsc /= static_cast<double>(t.phantoms.size());
  const double ratio = t.final / t.initial;
  return {ratio < 0.3 && dsc >= 0.5 && t.seconds <= 1800.0,
          fmt("objective %.4g -> %.4g (ratio %.4f), mean DSC %.3f at 64^3, training %.0f s", t.initial, t.final, ratio,
              dsc, t.seconds)};
}

Outcome refinement_trend() {
  const Trained& t = trained();
  double cd[2] = {0.0, 0.0};
  std::size_t empty = 0;
  for (int i = 0; i < 2; ++i) {
    PipelineConfig cfg;
    cfg.seed = 5;
    cfg.refinements = i == 0 ? 1 : 3;
    std::vector<MetricsReport> reports;
    for (const Phantom& ph : t.phantoms) {
      reports.push_back(metrics::evaluate_case(complete(ph.defective, t.params, cfg).defect_volume, ph.defect));
    }
    const MetricsSummary s = metrics::aggregate(reports);
    if (!s.cd_mm || s.distances != t.phantoms.size()) ++empty;
    cd[i] = s.cd_mm.value_or(0.0);
  }
  return {empty == 0 && cd[1] <= cd[0], fmt("mean CD M=1 %.4f mm, M=3 %.4f mm", cd[0], cd[1])};
}

Outcome memory_and_time() {
  const ModelConfig model;
  const ModelParams params = model::init_params(model, 7);
  PipelineConfig cfg;
  cfg.refinements = 1;
  std::size_t peak[2] = {0, 0};
  double best[2] = {1e300, 1e300};
  std::size_t groups[2] = {0, 0};
  const std::size_t counts[2] = {1, 10};
  for (int i = 0; i < 2; ++i) {
    const VoxelVolume v = data::solid_block(counts[i] * model.group_in);
    complete(v, params, cfg);
    for (int rep = 0; rep < 3; ++rep) {
      const ReconstructionResult r = complete(v, params, cfg);
      peak[i] = std::max(peak[i], r.provenance.peak_tracked_bytes);
      best[i] = std::min(best[i], r.provenance.seconds);
      groups[i] = r.provenance.iterations[0].groups;
    }
  }
  const double spread = std::abs(static_cast<double>(peak[1]) - static_cast<double>(peak[0])) /
                        static_cast<double>(peak[0]);
  const double ratio = best[1] / best[0];
  return {groups[0] == 1 && groups[1] == 10 && spread < 0.1 && ratio >= 6.0 && ratio <= 14.0,
          fmt("peak %zu vs %zu bytes (%.1f%%), time %.3f s vs %.3f s (ratio %.2f)", peak[0], peak[1], 100.0 * spread,
              best[0], best[1], ratio)};
}

Outcome pipeline_identities() {
  std::size_t broken = 0;
  for (std::size_t i = 0; i < 50; ++i) {
    PhantomSpec s;
    s.grid = 32;
    s.radius = 11.0;
    s.thickness = 2;
    s.kind = i % 2 ? PhantomSpec::Kind::ellipsoid_shell : PhantomSpec::Kind::sphere_shell;
    s.seed = 500;
    const Phantom ph = data::make_phantom(data::phantom_spec(s, i));
    for (const VoxelVolume* v : {&ph.defective, &ph.defect, &ph.complete}) {
      const VoxelizeResult r = voxel::voxelize(cloud::cloud_from_volume(*v), *v);
      if (!(r.volume == *v) || r.dropped != 0) ++broken;
    }
  }

  ModelConfig small;
  small.group_in = 64;
  small.group_out = 32;
  small.n_proxies = 16;
  small.feat_dim = 16;
  small.n_enc_blocks = 1;
  small.n_dec_blocks = 1;
  small.n_heads = 2;
  small.knn_k = 4;
  small.n_queries = 4;
  small.fold_seed = 2;
  const ModelParams params = model::init_params(small, 3);
  std::vector<CaseInput> cases;
  for (std::uint64_t i = 0; i < 4; ++i) {
    PhantomSpec s;
    s.grid = 24;
    s.radius = 8.0;
    s.thickness = 2;
    s.seed = 40 + i;
    cases.push_back({"case" + std::to_string(i), {}, data::make_phantom(s).defective});
  }
  PipelineConfig cfg;
  cfg.seed = 77;
  std::size_t differing = 0;
  const auto serial = pipeline::complete_batch(cases, params, cfg, 1);
  const auto again = pipeline::complete_batch(cases, params, cfg, 1);
  const auto parallel = pipeline::complete_batch(cases, params, cfg, 3);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (!serial[i].result || !again[i].result || !parallel[i].result) {
      ++differing;
      continue;
    }
    ++g_completions;
    if (!disjoint(serial[i].result->defect_volume, *cases[i].volume)) ++g_overlapping;
    if (!same(*serial[i].result, *again[i].result) || !same(*serial[i].result, *parallel[i].result)) ++differing;
  }
  return {broken == 0 && g_overlapping == 0 && g_completions > 0 && differing == 0,
          fmt("150 round trips, %zu broken; %zu of %zu completions overlap the input; %zu of 4 cases differ across "
              "runs or worker counts",
              broken, g_overlapping, g_completions, differing)};
}

Outcome zero_init_identities() {
  ModelConfig c;
  c.group_in = 64;
  c.group_out = 16;
  c.n_proxies = 16;
  c.feat_dim = 16;
  c.n_enc_blocks = 3;
  c.n_dec_blocks = 1;
  c.n_heads = 2;
  c.knn_k = 4;
  c.n_queries = 2;
  c.fold_seed = 2;
  c.fold_radius = 0.1;

  auto random_rows = [](Eigen::Index r, Eigen::Index cols, std::uint64_t seed) {
    Rng rng(seed);
    ad::Matrix m(r, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
    return m;
  };

  ModelParams p = model::init_params(c, 4);
  model::zero_residual_branches(p);
  const ad::Matrix feats = 3.0 * random_rows(16, 16, 2);
  const bool identity = model::encode(random_rows(16, 3, 1).cwiseAbs(), feats, p) == feats;

  ModelParams f = model::init_params(c, 7);
  model::zero_fold_offsets(f);
  const ad::Matrix centers = random_rows(2, 3, 2);
  const ad::Matrix moved = model::fold3d(centers, random_rows(2, 16, 3), f);
  const ad::Matrix seed = model::seed_lattice(c);
  bool lattice = moved.rows() == 16;
  for (Eigen::Index q = 0; lattice && q < 2; ++q)
    for (Eigen::Index j = 0; j < 8; ++j)
      for (int a = 0; a < 3; ++a) lattice = lattice && moved(q * 8 + j, a) == centers(q, a) + seed(j, a);

  std::size_t configs = 0, wrong = 0;
  for (std::size_t s : {1, 2, 3}) {
    for (std::size_t q : {1, 4}) {
      for (std::size_t heads : {1, 2}) {
        ModelConfig sweep = c;
        sweep.fold_seed = s;
        sweep.n_queries = q;
        sweep.group_out = q * s * s * s;
        sweep.n_heads = heads;
        sweep.n_enc_blocks = heads;
        sweep.n_dec_blocks = 3 - heads;
        sweep.validate();
        auto pts = oracle::random_points(sweep.group_in, configs);
        const PointCloud out = model::forward(PointCloud(std::move(pts), NormTransform{}), model::init_params(sweep, 11), 3);
        ++configs;
        if (out.size() != sweep.group_out) ++wrong;
      }
    }
  }
  return {identity && lattice && configs >= 12 && wrong == 0,
          fmt("encoder identity %s, translated lattices %s, %zu of %zu configs with wrong output size",
              identity ? "yes" : "no", lattice ? "yes" : "no", wrong, configs)};
}

Outcome dacd_duplication() {
  std::size_t increased = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    fixture::Pair p = fixture::matched_pair(64, 50 + s);
    const double before = objective::dacd(p.pr, p.gt, 1.0).value;
    p.pr.push_back(p.pr[(7 * s) % p.pr.size()]);
    if (objective::dacd(p.pr, p.gt, 1.0).value > before) ++increased;
  }
  return {increased == 10, fmt("%zu of 10 fixtures increased", increased)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shapefill acceptance checks"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"knn matches brute force", knn_oracle},
      {"objective gradients match finite differences", gradient_checks},
      {"uniformity term fixtures", uniformity_fixtures},
      {"metrics match brute force", metrics_oracles},
      {"overfit on 8 phantoms", overfit},
      {"refinement does not increase chamfer distance", refinement_trend},
      {"flat memory and linear time in the group count", memory_and_time},
      {"pipeline identities", pipeline_identities},
      {"zero-init model identities", zero_init_identities},
      {"dacd grows with a duplicated point", dacd_duplication},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(n)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
