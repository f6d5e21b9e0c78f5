// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "shapefill/config.hpp"
#include "shapefill/io.hpp"
#include "shapefill/mesh.hpp"
#include "shapefill/metrics.hpp"
#include "shapefill/random.hpp"

namespace fs = std::filesystem;

namespace shapefill::cli {
namespace {

// Streams of the master seed used by training.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kEvalStream = 3;

struct Context {
  RunConfig cfg;
  fs::path out;
  int verbosity = 1;
};

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

RunConfig resolve(const CommonOptions& common) {
  std::vector<std::string> overrides = common.overrides;
  if (common.seed) overrides.push_back("seed=" + std::to_string(*common.seed));
  if (common.jobs) overrides.push_back("jobs=" + std::to_string(*common.jobs));
  return config::load(common.config, overrides);
}

void write_snapshot(const Context& ctx, const std::string& command_line) {
  std::string text = "# " + command_line + "\n" + config::to_toml(ctx.cfg);
  io::write_file_atomic(ctx.out / "config.toml", text);
}

Context prepare(const CommonOptions& common) {
  Context ctx{resolve(common), common.out, common.verbosity};
  make_dir(ctx.out);
  return ctx;
}

std::string volume_stem(const fs::path& p) {
  std::string name = p.filename().string();
  for (const char* ext : {".nrrd", ".json", ".raw"}) {
    const std::string e(ext);
    if (name.size() > e.size() && name.ends_with(e)) return name.substr(0, name.size() - e.size());
  }
  return p.stem().string();
}

struct CaseSource {
  std::string id;
  std::optional<fs::path> input_path;
  std::optional<VoxelVolume> input;
  std::optional<fs::path> truth_path;
  std::optional<VoxelVolume> truth;

  VoxelVolume load_input() const { return input ? *input : voxel::load_volume(*input_path); }
  VoxelVolume load_truth() const {
    if (truth) return *truth;
    if (!truth_path) throw ValidationError("case " + id + " has no ground truth");
    return voxel::load_volume(*truth_path);
  }
  CaseInput case_input() const { return {id, input_path.value_or(fs::path()), input}; }
};

std::vector<CaseSource> phantom_sources(const RunConfig& cfg, std::size_t count) {
  PhantomSpec base = cfg.phantom;
  base.seed = cfg.seed;
  std::vector<CaseSource> out;
  for (std::size_t i = 0; i < count; ++i) {
    Phantom ph = data::make_phantom(data::phantom_spec(base, i));
    char name[32];
    std::snprintf(name, sizeof name, "case_%03zu", i);
    out.push_back({name, std::nullopt, std::move(ph.defective), std::nullopt, std::move(ph.defect)});
  }
  return out;
}

// `default_split` applies when no split is given; the phantoms layout has only a test split.
std::vector<CaseSource> collect_sources(const SourceOptions& opts, const RunConfig& cfg,
                                        const std::string& default_split, bool need_truth) {
  const int kinds = (opts.inputs.empty() ? 0 : 1) + (opts.data ? 1 : 0) + (opts.phantoms > 0 ? 1 : 0);
  if (kinds != 1) throw ValidationError("give exactly one of: input files, --data or --phantoms");
  std::vector<CaseSource> out;
  if (opts.phantoms > 0) {
    out = phantom_sources(cfg, opts.phantoms);
  } else if (!opts.inputs.empty()) {
    if (need_truth) throw ValidationError("ground truth needs --data or --phantoms");
    for (const fs::path& p : opts.inputs) out.push_back({volume_stem(p), p, std::nullopt, std::nullopt, std::nullopt});
  } else {
    const DatasetLayout layout = data::parse_layout(opts.layout);
    std::string split = opts.split.empty() ? default_split : opts.split;
    if (layout == DatasetLayout::phantoms && opts.split.empty()) split = "all";
    if (split != "train" && split != "test" && split != "all") {
      throw ValidationError("--split must be train, test or all");
    }
    const DatasetScan scan = data::scan_dataset(*opts.data, layout);
    for (const CaseRecord& r : scan.records) {
      if (split == "train" && r.split != DatasetSplit::train) continue;
      if (split == "test" && r.split != DatasetSplit::test) continue;
      if (need_truth && !r.complete_pair()) {
        std::cerr << "skipping " << r.id << ": missing " << r.missing.front() << "\n";
        continue;
      }
      CaseSource c{r.id, r.defective, std::nullopt, std::nullopt, std::nullopt};
      if (r.complete_pair()) c.truth_path = r.defect;
      out.push_back(std::move(c));
    }
  }
  if (opts.limit > 0 && out.size() > opts.limit) out.resize(opts.limit);
  if (out.empty()) throw ValidationError("no cases selected");
  std::set<std::string> ids;
  for (const CaseSource& c : out) {
    if (!ids.insert(c.id).second) throw ValidationError("duplicate case id " + c.id);
  }
  return out;
}

std::string loss_csv(const TrainState& state, const TrainConfig& cfg) {
  std::ostringstream out;
  out.precision(10);
  out << "step,loss,learning_rate\n";
  for (std::size_t i = 0; i < state.loss_history.size(); ++i) {
    out << i + 1 << ',' << state.loss_history[i] << ',' << train::learning_rate(cfg, i) << '\n';
  }
  return out.str();
}

std::string csv_number(const std::optional<double>& x) {
  if (!x) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *x);
  return buf;
}

}  // namespace

int cmd_convert(const CommonOptions& common, const ConvertOptions& opts) {
  Context ctx = prepare(common);
  write_snapshot(ctx, common.command_line);
  VoxelVolume v = voxel::load_volume(opts.input);
  if (opts.spacing) v = data::resample_spacing(v, *opts.spacing);
  PointCloud pc = cloud::cloud_from_volume(v);
  if (!opts.world) pc = cloud::normalize(pc);
  const fs::path path = ctx.out / (volume_stem(opts.input) + ".ply");
  cloud::write_ply(pc, path, opts.binary);
  std::cout << "points " << pc.size() << "\n";
  if (ctx.verbosity > 0) std::cerr << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_train(const CommonOptions& common, const TrainOptions& opts) {
  Context ctx = prepare(common);
  RunConfig& cfg = ctx.cfg;
  if (opts.steps) cfg.train.steps = *opts.steps;
  if (opts.source.phantoms > 0) cfg.phantom_count = opts.source.phantoms;

  TrainState state;
  if (opts.resume) {
    state = checkpoint::load(*opts.resume);
    cfg.model = state.params.config;
  } else {
    state = train::initial_state(cfg.model, derive_seed(cfg.seed, kInitStream));
  }
  cfg.validate();
  write_snapshot(ctx, common.command_line);

  std::vector<TrainSample> samples;
  for (const CaseSource& c : collect_sources(opts.source, cfg, "train", true)) {
    samples.push_back(train::make_sample(c.load_input(), c.load_truth(), c.id));
  }
  if (ctx.verbosity > 0) {
    std::cerr << "training on " << samples.size() << " cases, " << state.params.parameter_count()
              << " parameters, steps " << state.adam.step << " -> " << cfg.train.steps << "\n";
  }

  const std::uint64_t eval_seed = derive_seed(cfg.seed, kEvalStream);
  const double initial = train::evaluate_objective(state.params, samples, cfg.objective, eval_seed);
  const fs::path ckpt_dir = ctx.out / "checkpoints";
  if (cfg.checkpoint_every > 0) make_dir(ckpt_dir);
  const auto started = std::chrono::steady_clock::now();

  int code = kExitOk;
  try {
    train::run(state, samples, cfg.train, cfg.objective, derive_seed(cfg.seed, kTrainStream),
               [&](const TrainState& s, double loss) {
                 const std::uint64_t step = s.adam.step;
                 if (ctx.verbosity > 0 && opts.log_every > 0 && (step % opts.log_every == 0 || step == 1)) {
                   std::cerr << "step " << step << " loss " << loss << "\n";
                 }
                 if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
                   char name[32];
                   std::snprintf(name, sizeof name, "step_%06llu.ckpt", static_cast<unsigned long long>(step));
                   checkpoint::save(s, ckpt_dir / name);
                   io::write_file_atomic(ctx.out / "loss.csv", loss_csv(s, cfg.train));
                 }
               });
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "; saving the last finite state\n";
    code = kExitDivergence;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  checkpoint::save(state, ctx.out / "model.ckpt");
  io::write_file_atomic(ctx.out / "loss.csv", loss_csv(state, cfg.train));
  if (code != kExitOk) return code;

  const double final_value = train::evaluate_objective(state.params, samples, cfg.objective, eval_seed);
  const nlohmann::json summary = {{"cases", samples.size()},
                                  {"steps", state.adam.step},
                                  {"objective", objective::to_string(cfg.objective.kind)},
                                  {"initial_objective", initial},
                                  {"final_objective", final_value},
                                  {"ratio", final_value / initial},
                                  {"seconds", seconds}};
  io::write_file_atomic(ctx.out / "train_summary.json", summary.dump(2) + "\n");
  std::cout << "objective " << initial << " -> " << final_value << " (ratio " << final_value / initial << ")\n";
  return kExitOk;
}

int cmd_complete(const CommonOptions& common, const CompleteOptions& opts) {
  Context ctx = prepare(common);
  RunConfig& cfg = ctx.cfg;
  if (opts.refinements) cfg.pipeline.refinements = *opts.refinements;
  if (opts.stl) cfg.pipeline.mesh = true;
  const ModelParams params = checkpoint::load_params(opts.checkpoint);
  cfg.model = params.config;
  cfg.validate();
  write_snapshot(ctx, common.command_line);

  const PipelineConfig pcfg = cfg.pipeline_config();
  pcfg.check_budgets(params.config);
  const std::vector<CaseSource> sources = collect_sources(opts.source, cfg, "test", false);
  std::vector<CaseInput> cases;
  for (const CaseSource& c : sources) cases.push_back(c.case_input());
  const std::vector<CaseOutcome> outcomes = pipeline::complete_batch(cases, params, pcfg, cfg.jobs);

  int code = kExitOk;
  nlohmann::json index = nlohmann::json::array();
  for (const CaseOutcome& o : outcomes) {
    if (!o.result) {
      std::cerr << "error: " << o.id << ": " << o.error << "\n";
      index.push_back({{"id", o.id}, {"error", o.error}, {"exit_code", o.exit_code}});
      if (code == kExitOk) code = o.exit_code;
      continue;
    }
    const ReconstructionResult& r = *o.result;
    const fs::path dir = ctx.out / r.id;
    make_dir(dir);
    cloud::write_ply(r.defect_cloud, dir / "defect.ply", true);
    voxel::save_volume(r.defect_volume, dir / "defect");
    if (r.mesh) voxel::write_stl(*r.mesh, dir / "defect.stl");
    io::write_file_atomic(dir / "report.json", pipeline::report_json(r));
    index.push_back({{"id", r.id}, {"defect_voxels", r.defect_volume.count()}, {"empty", r.empty}});
    std::cout << r.id << " voxels " << r.defect_volume.count() << " seconds " << r.provenance.seconds << "\n";
  }
  io::write_file_atomic(ctx.out / "cases.json", index.dump(2) + "\n");
  return code;
}

int cmd_evaluate(const CommonOptions& common, const EvaluateOptions& opts) {
  Context ctx = prepare(common);
  write_snapshot(ctx, common.command_line);

  struct Pair {
    std::string id;
    fs::path pred;
    std::optional<fs::path> truth_path;
    std::optional<VoxelVolume> truth;
  };
  std::vector<Pair> pairs;
  if (!opts.pairs.empty()) {
    if (opts.predictions) throw ValidationError("use either --pair or --predictions");
    for (const std::string& p : opts.pairs) {
      const auto eq = p.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == p.size()) {
        throw ValidationError("--pair expects PRED=GT, got '" + p + "'");
      }
      const fs::path pred = p.substr(0, eq);
      const std::string parent = pred.parent_path().filename().string();
      const std::string id = parent.empty() || parent == "." ? volume_stem(pred) : parent + "/" + volume_stem(pred);
      pairs.push_back({id, pred, fs::path(p.substr(eq + 1)), std::nullopt});
    }
  } else {
    if (!opts.predictions) throw ValidationError("evaluate needs --pair or --predictions with a ground-truth source");
    for (CaseSource& c : collect_sources(opts.source, ctx.cfg, "test", true)) {
      pairs.push_back({c.id, *opts.predictions / c.id / "defect.json", c.truth_path, std::move(c.truth)});
    }
  }

  std::set<std::string> ids;
  for (const Pair& p : pairs) {
    if (!ids.insert(p.id).second) throw ValidationError("duplicate case id " + p.id);
  }

  int code = kExitOk;
  std::vector<MetricsReport> reports;
  const fs::path dir = ctx.out / "metrics";
  for (const Pair& p : pairs) {
    MetricsReport r;
    try {
      const VoxelVolume truth = p.truth ? *p.truth : voxel::load_volume(*p.truth_path);
      r = metrics::evaluate_case(voxel::load_volume(p.pred), truth, p.id);
      if (!r.error.empty() && code == kExitOk) code = kExitValidation;
    } catch (const Error& e) {
      r.id = p.id;
      r.error = e.what();
      if (code == kExitOk) code = exit_code_of(e);
    }
    if (!r.error.empty()) std::cerr << "error: " << p.id << ": " << r.error << "\n";
    make_dir((dir / (p.id + ".json")).parent_path());
    io::write_file_atomic(dir / (p.id + ".json"), metrics::to_json(r));
    reports.push_back(std::move(r));
  }
  io::write_file_atomic(ctx.out / "metrics.csv", metrics::to_csv(reports));
  const MetricsSummary s = metrics::aggregate(reports);
  std::cout << "cases " << s.cases << " DSC " << csv_number(s.dsc) << " BDSC " << csv_number(s.bdsc) << " HD95 "
            << csv_number(s.hd95_mm) << " CD " << csv_number(s.cd_mm) << "\n";
  return code;
}

int cmd_ablate(const CommonOptions& common, const AblateOptions& opts) {
  Context ctx = prepare(common);
  RunConfig& cfg = ctx.cfg;
  const ModelParams params = checkpoint::load_params(opts.checkpoint);
  cfg.model = params.config;
  cfg.validate();
  write_snapshot(ctx, common.command_line);
  if (opts.refinements.empty()) throw ValidationError("--refinements needs at least one value");

  const std::vector<CaseSource> sources = collect_sources(opts.source, cfg, "test", true);
  std::vector<CaseInput> cases;
  std::vector<VoxelVolume> truths;
  for (const CaseSource& c : sources) {
    cases.push_back(c.case_input());
    truths.push_back(c.load_truth());
  }

  std::ostringstream table;
  table << "refinements,cases,dsc,bdsc,hd95_mm,cd_mm\n";
  for (std::size_t m : opts.refinements) {
    PipelineConfig pcfg = cfg.pipeline_config();
    pcfg.refinements = m;
    const auto outcomes = pipeline::complete_batch(cases, params, pcfg, cfg.jobs);
    std::vector<MetricsReport> reports;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (!outcomes[i].result) {
        std::cerr << "error: " << outcomes[i].id << ": " << outcomes[i].error << "\n";
        return outcomes[i].exit_code;
      }
      reports.push_back(metrics::evaluate_case(outcomes[i].result->defect_volume, truths[i], outcomes[i].id));
    }
    io::write_file_atomic(ctx.out / ("ablation_m" + std::to_string(m) + ".csv"), metrics::to_csv(reports));
    const MetricsSummary s = metrics::aggregate(reports);
    table << m << ',' << s.cases << ',' << csv_number(s.dsc) << ',' << csv_number(s.bdsc) << ','
          << csv_number(s.hd95_mm) << ',' << csv_number(s.cd_mm) << '\n';
    std::cout << "M=" << m << " DSC " << csv_number(s.dsc) << " BDSC " << csv_number(s.bdsc) << " HD95 "
              << csv_number(s.hd95_mm) << " CD " << csv_number(s.cd_mm) << "\n";
  }
  io::write_file_atomic(ctx.out / "ablation.csv", table.str());
  return kExitOk;
}

int cmd_bench(const CommonOptions& common, const BenchOptions& opts) {
  Context ctx = prepare(common);
  RunConfig& cfg = ctx.cfg;
  const ModelParams params = checkpoint::load_params(opts.checkpoint);
  cfg.model = params.config;
  cfg.pipeline.refinements = 1;
  cfg.validate();
  write_snapshot(ctx, common.command_line);
  if (opts.groups.empty() || opts.repeats == 0) throw ValidationError("bench needs group counts and repeats >= 1");
  const PipelineConfig pcfg = cfg.pipeline_config();

  struct Row {
    std::size_t groups, points, peak;
    double seconds;
  };
  std::vector<Row> rows;
  // Untimed warm-up so first-touch costs do not land on the first row.
  pipeline::complete_case(data::solid_block(params.config.group_in), params, pcfg, "warmup");
  for (std::size_t g : opts.groups) {
    if (g == 0) throw ValidationError("group counts must be >= 1");
    const VoxelVolume v = data::solid_block(g * params.config.group_in);
    Row row{g, v.count(), 0, 0.0};
    for (std::size_t r = 0; r < opts.repeats; ++r) {
      const ReconstructionResult res = pipeline::complete_case(v, params, pcfg, "bench");
      if (res.provenance.iterations.front().groups != g) throw ValidationError("bench volume did not split as planned");
      row.peak = std::max(row.peak, res.provenance.peak_tracked_bytes);
      row.seconds = r == 0 ? res.provenance.seconds : std::min(row.seconds, res.provenance.seconds);
    }
    rows.push_back(row);
  }

  std::ostringstream csv;
  csv << "groups,points,peak_tracked_bytes,seconds\n";
  for (const Row& r : rows) {
    csv << r.groups << ',' << r.points << ',' << r.peak << ',' << csv_number(r.seconds) << '\n';
  }
  io::write_file_atomic(ctx.out / "bench.csv", csv.str());
  std::cout << csv.str();
  if (!opts.check) return kExitOk;

  const auto [lo_peak, hi_peak] = std::minmax_element(rows.begin(), rows.end(),
                                                      [](const Row& a, const Row& b) { return a.peak < b.peak; });
  const double spread = static_cast<double>(hi_peak->peak - lo_peak->peak) / static_cast<double>(lo_peak->peak);
  const auto [few, many] = std::minmax_element(rows.begin(), rows.end(),
                                               [](const Row& a, const Row& b) { return a.groups < b.groups; });
  bool ok = spread < opts.memory_tolerance;
  std::cout << "memory spread " << spread << (ok ? " ok" : " FAILED") << "\n";
  if (many->groups > few->groups) {
    const double expected = static_cast<double>(many->groups) / static_cast<double>(few->groups);
    const double ratio = many->seconds / few->seconds;
    const bool linear = ratio >= 0.6 * expected && ratio <= 1.4 * expected;
    std::cout << "time ratio " << ratio << " for " << expected << "x groups" << (linear ? " ok" : " FAILED") << "\n";
    ok = ok && linear;
  }
  return ok ? kExitOk : kExitAssertion;
}

int cmd_phantoms(const CommonOptions& common, const PhantomsOptions& opts) {
  Context ctx = prepare(common);
  if (opts.count) ctx.cfg.phantom_count = *opts.count;
  ctx.cfg.validate();
  write_snapshot(ctx, common.command_line);
  PhantomSpec base = ctx.cfg.phantom;
  base.seed = ctx.cfg.seed;
  data::write_phantom_set(base, ctx.cfg.phantom_count, ctx.out);
  std::cout << "phantoms " << ctx.cfg.phantom_count << "\n";
  return kExitOk;
}

}  // namespace shapefill::cli
