// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shapefill/cloud.hpp"
#include "shapefill/mesh.hpp"
#include "shapefill/model.hpp"
#include "shapefill/voxel.hpp"

namespace shapefill {

struct PipelineConfig {
  std::size_t refinements = 3;  // M: split/complete/merge passes
  double jitter_sigma = 0.005;  // normalized units, skipped on the first pass
  // Group budgets; 0 takes them from the checkpoint, anything else must match it.
  std::size_t group_in = 0;
  std::size_t group_out = 0;
  StructuringElement closing{};
  Connectivity connectivity = Connectivity::twenty_six;
  bool mesh = false;
  std::uint64_t seed = 0;  // master seed

  void validate() const;
  // ValidationError unless the budgets agree with `model`.
  void check_budgets(const ModelConfig& model) const;
};

struct IterationRecord {
  std::uint64_t split_seed = 0;
  std::optional<std::uint64_t> jitter_seed;
  std::size_t groups = 0;
  std::size_t padding = 0;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::size_t refinements = 0;
  std::size_t input_points = 0;
  std::vector<IterationRecord> iterations;
  std::size_t predicted_points = 0;
  std::size_t dropped_points = 0;   // predictions outside the grid
  std::size_t removed_overlap = 0;  // voxels cleared by subtract_overlap
  std::size_t components = 0;       // before keeping the largest
  double seconds = 0.0;
  std::size_t peak_tracked_bytes = 0;
};

struct ReconstructionResult {
  std::string id;
  PointCloud defect_cloud;  // merged predictions, world millimetres
  VoxelVolume defect_volume;
  std::optional<TriangleMesh> mesh;
  bool empty = false;  // nothing survived postprocessing
  Provenance provenance;
};

struct CaseInput {
  std::string id;
  std::filesystem::path path;         // loaded when `volume` is not set
  std::optional<VoxelVolume> volume;
};

struct CaseOutcome {
  std::string id;
  std::optional<ReconstructionResult> result;
  std::string error;       // empty on success
  int exit_code = 0;       // CLI code of the error class
};

namespace pipeline {

ReconstructionResult complete_case(const VoxelVolume& defective, const ModelParams& params, const PipelineConfig& cfg,
                                   std::string id = {});

// Case i runs with seed cfg.seed ^ i. Results are order-aligned with
// `cases` and independent of `jobs`.
std::vector<CaseOutcome> complete_batch(std::span<const CaseInput> cases, const ModelParams& params,
                                        const PipelineConfig& cfg, std::size_t jobs);

// Provenance and summary counts as a JSON document.
std::string report_json(const ReconstructionResult& result);

}  // namespace pipeline
}  // namespace shapefill
