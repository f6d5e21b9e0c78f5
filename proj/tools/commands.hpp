// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace shapefill::cli {

struct CommonOptions {
  std::optional<std::filesystem::path> config;
  std::vector<std::string> overrides;  // dotted.key=value, applied after the file
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::filesystem::path out = "out";
  int verbosity = 1;  // 0 quiet, 1 normal, 2 verbose
  std::string command_line;
};

// Where cases come from: explicit volume files, a dataset tree or generated phantoms.
struct SourceOptions {
  std::vector<std::filesystem::path> inputs;
  std::optional<std::filesystem::path> data;
  std::string layout = "skullbreak";
  std::string split;  // train, test or all; empty picks the command default
  std::size_t limit = 0;
  std::size_t phantoms = 0;
};

struct ConvertOptions {
  std::filesystem::path input;
  std::optional<double> spacing;
  bool world = false;
  bool binary = false;
};

struct TrainOptions {
  SourceOptions source;
  std::optional<std::uint64_t> steps;
  std::optional<std::filesystem::path> resume;
  std::size_t log_every = 100;
};

struct CompleteOptions {
  SourceOptions source;
  std::filesystem::path checkpoint;
  std::optional<std::size_t> refinements;
  bool stl = false;
};

struct EvaluateOptions {
  SourceOptions source;  // ground truth
  std::vector<std::string> pairs;  // PRED=GT
  std::optional<std::filesystem::path> predictions;  // directory written by `complete`
};

struct AblateOptions {
  SourceOptions source;
  std::filesystem::path checkpoint;
  std::vector<std::size_t> refinements{1, 2, 3};
};

struct BenchOptions {
  std::filesystem::path checkpoint;
  std::vector<std::size_t> groups{1, 4, 10};
  std::size_t repeats = 3;
  bool check = false;
  double memory_tolerance = 0.1;
};

struct PhantomsOptions {
  std::optional<std::size_t> count;
};

int cmd_convert(const CommonOptions& common, const ConvertOptions& opts);
int cmd_train(const CommonOptions& common, const TrainOptions& opts);
int cmd_complete(const CommonOptions& common, const CompleteOptions& opts);
int cmd_evaluate(const CommonOptions& common, const EvaluateOptions& opts);
int cmd_ablate(const CommonOptions& common, const AblateOptions& opts);
int cmd_bench(const CommonOptions& common, const BenchOptions& opts);
int cmd_phantoms(const CommonOptions& common, const PhantomsOptions& opts);

}  // namespace shapefill::cli
