// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "shapefill/common.hpp"
#include "shapefill/data.hpp"

using namespace shapefill;
using namespace shapefill::cli;

namespace {

void add_common(CLI::App& sub, CommonOptions& c) {
  sub.add_option("--config", c.config, "TOML configuration file")->check(CLI::ExistingFile);
  sub.add_option("--set", c.overrides, "Override a configuration key (dotted.key=value), repeatable");
  sub.add_option("--seed", c.seed, "Master seed");
  sub.add_option("--jobs", c.jobs, "Cases processed in parallel");
  sub.add_option("--out", c.out, "Output directory")->capture_default_str();
  sub.add_flag_callback("-q,--quiet", [&c] { c.verbosity = 0; }, "Only print results");
  sub.add_flag_callback("-v,--verbose", [&c] { c.verbosity = 2; }, "Print more progress");
}

void add_source(CLI::App& sub, SourceOptions& s, bool with_inputs) {
  if (with_inputs) sub.add_option("inputs", s.inputs, "Defective volume files (NRRD or sidecar)");
  sub.add_option("--data", s.data, "Dataset root");
  sub.add_option("--layout", s.layout, "Dataset layout: skullbreak, skullfix or phantoms")->capture_default_str();
  sub.add_option("--split", s.split, "Dataset split: train, test or all");
  sub.add_option("--limit", s.limit, "Use at most this many cases");
  sub.add_option("--phantoms", s.phantoms, "Generate this many phantoms from the [phantom] settings");
}

std::string joined(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i > 0) out += ' ';
    out += argv[i];
  }
  return out;
}

std::string layouts_help() {
  std::string out = "\nDataset layouts:\n";
  for (DatasetLayout l : {DatasetLayout::skullbreak, DatasetLayout::skullfix, DatasetLayout::phantoms}) {
    out += "  " + std::string(data::layout_description(l)) + "\n";
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reconstructs the missing fragment of a defective solid shape"};
  app.require_subcommand(1);
  app.footer(layouts_help());

  CommonOptions common;
  common.command_line = joined(argc, argv);

  ConvertOptions convert;
  CLI::App* c = app.add_subcommand("convert", "Convert a volume to a point cloud (PLY)");
  add_common(*c, common);
  c->add_option("input", convert.input, "Volume file")->required();
  c->add_option("--spacing", convert.spacing, "Resample to this isotropic spacing (mm) first");
  c->add_flag("--world", convert.world, "Keep world millimetres instead of normalizing");
  c->add_flag("--binary", convert.binary, "Binary little-endian PLY");

  TrainOptions train;
  CLI::App* t = app.add_subcommand("train", "Train the completion model");
  add_common(*t, common);
  add_source(*t, train.source, false);
  t->add_option("--steps", train.steps, "Total optimizer steps");
  t->add_option("--resume", train.resume, "Continue from a checkpoint");
  t->add_option("--log-every", train.log_every, "Print the loss every N steps")->capture_default_str();

  CompleteOptions complete;
  CLI::App* k = app.add_subcommand("complete", "Reconstruct the defects of defective volumes");
  add_common(*k, common);
  add_source(*k, complete.source, true);
  k->add_option("--checkpoint", complete.checkpoint, "Model checkpoint")->required();
  k->add_option("--refinements", complete.refinements, "Number of split/complete/merge passes");
  k->add_flag("--stl", complete.stl, "Also write an STL surface");

  EvaluateOptions evaluate;
  CLI::App* e = app.add_subcommand("evaluate", "Score predicted defects against ground truth");
  add_common(*e, common);
  add_source(*e, evaluate.source, false);
  e->add_option("--pair", evaluate.pairs, "PRED=GT volume pair, repeatable");
  e->add_option("--predictions", evaluate.predictions, "Output directory of `complete`");

  AblateOptions ablate;
  CLI::App* a = app.add_subcommand("ablate", "Sweep the number of refinements and score each setting");
  add_common(*a, common);
  add_source(*a, ablate.source, false);
  a->add_option("--checkpoint", ablate.checkpoint, "Model checkpoint")->required();
  a->add_option("--refinements", ablate.refinements, "Refinement counts to compare")->delimiter(',');

  BenchOptions bench;
  CLI::App* b = app.add_subcommand("bench", "Measure tracked memory and time against the group count");
  add_common(*b, common);
  b->add_option("--checkpoint", bench.checkpoint, "Model checkpoint")->required();
  b->add_option("--groups", bench.groups, "Group counts to measure")->delimiter(',');
  b->add_option("--repeats", bench.repeats, "Timed runs per group count")->capture_default_str();
  b->add_flag("--assert", bench.check, "Fail with exit 5 unless memory is flat and time linear");

  PhantomsOptions phantoms;
  CLI::App* p = app.add_subcommand("phantoms", "Write a synthetic phantom set");
  add_common(*p, common);
  p->add_option("--count", phantoms.count, "Number of phantoms");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*c) return cmd_convert(common, convert);
    if (*t) return cmd_train(common, train);
    if (*k) return cmd_complete(common, complete);
    if (*e) return cmd_evaluate(common, evaluate);
    if (*a) return cmd_ablate(common, ablate);
    if (*b) return cmd_bench(common, bench);
    if (*p) return cmd_phantoms(common, phantoms);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return exit_code_of(ex);
  }
  return kExitFailure;
}
