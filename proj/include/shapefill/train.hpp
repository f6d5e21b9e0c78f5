// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "shapefill/cloud.hpp"
#include "shapefill/model.hpp"
#include "shapefill/objective.hpp"

namespace shapefill {

class VoxelVolume;

// One supervised pair in the frame of the defective cloud.
struct TrainSample {
  std::string id;
  PointCloud input;   // defective cloud, normalized
  PointCloud target;  // defect cloud, same transform as `input`
};

struct TrainConfig {
  std::uint64_t steps = 2000;
  double learning_rate = 1e-3;
  double final_learning_rate = 1e-5;  // end of the cosine decay
  std::uint64_t warmup_steps = 100;   // linear ramp before the decay
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip = 1.0;             // global gradient norm, 0 disables
  std::size_t batch_groups = 8;       // groups averaged per step
  AugmentConfig augment{0.1, 0.05, 0.01};

  void validate() const;
};

struct AdamState {
  std::uint64_t step = 0;
  std::map<std::string, ad::Matrix> m;
  std::map<std::string, ad::Matrix> v;
};

struct TrainState {
  ModelParams params;
  AdamState adam;
  std::vector<double> loss_history;  // mean objective of every step, before its update
};

namespace train {

// Normalizes the defective volume's cloud and maps the defect into the same frame.
TrainSample make_sample(const VoxelVolume& defective, const VoxelVolume& defect, std::string id);

// Seeded uniform downsample of the defect cloud to `group_out` points; every
// group of the sample is supervised with this same set.
std::vector<Vec3> training_target(const TrainSample& sample, std::size_t group_out, std::uint64_t seed);

TrainState initial_state(const ModelConfig& cfg, std::uint64_t seed);

// Linear warmup to learning_rate, then cosine decay to final_learning_rate at cfg.steps.
double learning_rate(const TrainConfig& cfg, std::uint64_t step);

using StepCallback = std::function<void(const TrainState&, double loss)>;

// Advances `state` until state.adam.step == cfg.steps. Step t draws all of its
// randomness from derive_seed(seed, t), so an interrupted run resumed from a
// saved state follows the same data order. A non-finite loss or gradient
// throws DivergenceError and leaves `state` at the last good step.
void run(TrainState& state, std::span<const TrainSample> data, const TrainConfig& cfg, const ObjectiveConfig& objective,
         std::uint64_t seed, const StepCallback& on_step = {});

// Mean objective over a fixed, unaugmented set of groups: the first group of
// a seeded split of every sample.
double evaluate_objective(const ModelParams& params, std::span<const TrainSample> data,
                          const ObjectiveConfig& objective, std::uint64_t seed);

}  // namespace train

// Binary container, little-endian throughout:
//   8 bytes  magic "SFCKPT01"
//   u32      format version (1)
//   u32 n, n bytes   model config and version tag as TOML text
//   u32      tensor count T, then T records of
//              u32 name length, name bytes, u32 rows, u32 cols, rows*cols f32 (row-major)
//   u8       optimizer flag; if 1:
//              u64 step, T records of Adam first moments, T records of second moments,
//              u32 n, n f64 loss history
namespace checkpoint {

void save(const TrainState& state, const std::filesystem::path& path);
void save(const ModelParams& params, const std::filesystem::path& path);
// Missing optimizer state loads as an empty AdamState.
TrainState load(const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

}  // namespace checkpoint
}  // namespace shapefill
