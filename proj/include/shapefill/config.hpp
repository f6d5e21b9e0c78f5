// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "shapefill/data.hpp"
#include "shapefill/model.hpp"
#include "shapefill/objective.hpp"
#include "shapefill/pipeline.hpp"
#include "shapefill/train.hpp"

namespace shapefill {

// Every tunable of a run. TOML keys mirror the field names, grouped in the
// tables [model], [objective], [train], [train.augment], [pipeline] and
// [phantom]; `seed` and `jobs` sit at the top level.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  ModelConfig model;
  ObjectiveConfig objective;
  TrainConfig train;
  std::uint64_t checkpoint_every = 0;  // train.checkpoint_every, 0 keeps only the final one
  PipelineConfig pipeline;             // seed follows the run
  PhantomSpec phantom;
  std::size_t phantom_count = 8;       // phantom.count

  void validate() const;
  // Pipeline settings with the run seed filled in.
  PipelineConfig pipeline_config() const;
};

namespace config {

// Applies a TOML document. Unknown keys and ill-typed values throw ValidationError.
void apply_toml(RunConfig& cfg, std::string_view text);
// `dotted.key=value` where value is a TOML literal; bare words are taken as strings.
void apply_override(RunConfig& cfg, std::string_view assignment);

// Defaults, then the file (if any), then the overrides in order; validated.
RunConfig load(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides);

// Complete resolved configuration; apply_toml(RunConfig{}, to_toml(c)) == c.
std::string to_toml(const RunConfig& cfg);

// The [model] table plus a top-level `version` tag, as stored in checkpoints.
std::string model_to_toml(const ModelConfig& cfg, std::string_view version);
std::pair<ModelConfig, std::string> model_from_toml(std::string_view text);

}  // namespace config
}  // namespace shapefill
