// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapefill/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include <json.hpp>

#include "shapefill/memtrack.hpp"
#include "shapefill/random.hpp"

namespace shapefill {

void PipelineConfig::validate() const {
  if (refinements == 0) throw ValidationError("pipeline.refinements must be >= 1");
  if (!std::isfinite(jitter_sigma) || jitter_sigma < 0.0) throw ValidationError("pipeline.jitter_sigma must be >= 0");
  if (closing.radius < 0) throw ValidationError("pipeline.closing_radius must be >= 0");
}

void PipelineConfig::check_budgets(const ModelConfig& model) const {
  if ((group_in != 0 && group_in != model.group_in) || (group_out != 0 && group_out != model.group_out)) {
    throw ValidationError("group budgets " + std::to_string(group_in) + "/" + std::to_string(group_out) +
                          " do not match the checkpoint's " + std::to_string(model.group_in) + "/" +
                          std::to_string(model.group_out));
  }
}

namespace pipeline {
namespace {

std::uint64_t split_seed(std::uint64_t seed, std::size_t iteration) { return derive_seed(seed, 2 * iteration); }
std::uint64_t jitter_seed(std::uint64_t seed, std::size_t iteration) { return derive_seed(seed, 2 * iteration + 1); }

}  // namespace

ReconstructionResult complete_case(const VoxelVolume& defective, const ModelParams& params, const PipelineConfig& cfg,
                                   std::string id) {
  cfg.validate();
  cfg.check_budgets(params.config);
  const auto started = std::chrono::steady_clock::now();
  memtrack::PeakScope peak;

  ReconstructionResult result;
  result.id = std::move(id);
  Provenance& prov = result.provenance;
  prov.seed = cfg.seed;
  prov.refinements = cfg.refinements;

  const PointCloud base = cloud::normalize(cloud::cloud_from_volume(defective));
  prov.input_points = base.size();
  const ModelConfig& mc = params.config;

  std::vector<PointCloud> outputs;
  for (std::size_t m = 0; m < cfg.refinements; ++m) {
    IterationRecord rec;
    PointCloud input = base;
    if (m > 0) {
      rec.jitter_seed = jitter_seed(cfg.seed, m);
      input = cloud::jitter(base, cfg.jitter_sigma, *rec.jitter_seed);
    }
    rec.split_seed = split_seed(cfg.seed, m);
    const GroupSplit split = cloud::split_groups(input, mc.group_in, rec.split_seed, mc.group_out);
    rec.groups = split.groups.size();
    rec.padding = split.padding;
    for (std::size_t g = 0; g < split.groups.size(); ++g) {
      const PointCloud group = cloud::gather(input, split.groups[g]);
      outputs.push_back(model::forward(group, params, derive_seed(rec.split_seed, g + 1)));
    }
    prov.iterations.push_back(rec);
  }

  result.defect_cloud = cloud::denormalize(cloud::merge(outputs));
  prov.predicted_points = result.defect_cloud.size();

  VoxelizeResult vox = voxel::voxelize(result.defect_cloud, defective);
  prov.dropped_points = vox.dropped;
  const VoxelVolume closed = voxel::binary_closing(vox.volume, cfg.closing);
  ComponentResult largest = voxel::largest_component(closed, cfg.connectivity);
  prov.components = largest.components;
  result.defect_volume = voxel::subtract_overlap(largest.volume, defective);
  prov.removed_overlap = largest.kept_voxels - result.defect_volume.count();
  result.empty = result.defect_volume.count() == 0;
  if (cfg.mesh && !result.empty) result.mesh = voxel::extract_surface_mesh(result.defect_volume);

  prov.peak_tracked_bytes = peak.peak_bytes();
  prov.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

std::vector<CaseOutcome> complete_batch(std::span<const CaseInput> cases, const ModelParams& params,
                                        const PipelineConfig& cfg, std::size_t jobs) {
  cfg.validate();
  cfg.check_budgets(params.config);
  std::vector<CaseOutcome> out(cases.size());
  auto run_one = [&](std::size_t i) {
    const CaseInput& c = cases[i];
    CaseOutcome& o = out[i];
    o.id = c.id;
    try {
      PipelineConfig case_cfg = cfg;
      case_cfg.seed = cfg.seed ^ static_cast<std::uint64_t>(i);
      if (c.volume) {
        o.result = complete_case(*c.volume, params, case_cfg, c.id);
      } else {
        o.result = complete_case(voxel::load_volume(c.path), params, case_cfg, c.id);
      }
    } catch (const std::exception& e) {
      o.error = e.what();
      o.exit_code = exit_code_of(e);
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, cases.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < cases.size(); ++i) run_one(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < cases.size(); i = next++) run_one(i);
    });
  }
  for (std::thread& t : pool) t.join();
  return out;
}

std::string report_json(const ReconstructionResult& r) {
  using nlohmann::json;
  const Provenance& p = r.provenance;
  json iterations = json::array();
  for (const IterationRecord& it : p.iterations) {
    iterations.push_back({{"split_seed", it.split_seed},
                          {"jitter_seed", it.jitter_seed ? json(*it.jitter_seed) : json(nullptr)},
                          {"groups", it.groups},
                          {"padding", it.padding}});
  }
  json doc = {
      {"id", r.id},
      {"empty", r.empty},
      {"defect_voxels", r.defect_volume.count()},
      {"defect_points", r.defect_cloud.size()},
      {"mesh_triangles", r.mesh ? json(r.mesh->triangles.size()) : json(nullptr)},
      {"provenance",
       {{"seed", p.seed},
        {"refinements", p.refinements},
        {"input_points", p.input_points},
        {"iterations", iterations},
        {"predicted_points", p.predicted_points},
        {"dropped_points", p.dropped_points},
        {"removed_overlap_voxels", p.removed_overlap},
        {"components", p.components},
        {"seconds", p.seconds},
        {"peak_tracked_bytes", p.peak_tracked_bytes}}},
  };
  return doc.dump(2) + "\n";
}

}  // namespace pipeline
}  // namespace shapefill
