// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shapefill/voxel.hpp"

namespace shapefill {

enum class DatasetLayout { skullbreak, skullfix, phantoms };
enum class DatasetSplit { train, test };

struct CaseRecord {
  std::string id;
  std::filesystem::path defective;
  std::filesystem::path defect;
  std::optional<std::filesystem::path> complete;
  std::optional<std::string> defect_class;
  DatasetSplit split = DatasetSplit::train;
  std::vector<std::string> missing;  // expected files that do not exist

  bool complete_pair() const { return missing.empty(); }
};

struct DatasetScan {
  std::vector<CaseRecord> records;  // sorted by split, then id
  std::size_t train = 0;
  std::size_t test = 0;
  std::size_t flagged = 0;  // records with missing files
};

struct PhantomSpec {
  enum class Kind { sphere_shell, ellipsoid_shell };
  Kind kind = Kind::sphere_shell;
  int grid = 64;
  double radius = 22.0;        // outer radius in voxels (longest semi-axis for ellipsoids)
  int thickness = 3;           // voxels
  double defect_fraction = 0.12;  // solid-angle fraction of the defect cone
  std::uint64_t seed = 0;

  void validate() const;
};

struct Phantom {
  VoxelVolume defective;
  VoxelVolume defect;
  VoxelVolume complete;
};

namespace data {

// Directory conventions of `layout`, as shown by the CLI and README.
std::string_view layout_description(DatasetLayout layout);
DatasetLayout parse_layout(std::string_view name);

// Enumerates cases by file name without reading volumes. IoError if the root
// is missing, ValidationError if no case is found.
DatasetScan scan_dataset(const std::filesystem::path& root, DatasetLayout layout);

// Nearest-neighbor resampling onto an isotropic `target_mm` grid over the same
// physical extent. ValidationError if an axis would get fewer than 2 voxels.
VoxelVolume resample_spacing(const VoxelVolume& v, double target_mm);

// Shell around a seeded center; the defect is the part of the shell inside a
// cone from the center whose solid angle is defect_fraction of the sphere.
Phantom make_phantom(const PhantomSpec& spec);

// Spec of phantom `index` in a set drawn from `base`: the seed becomes
// derive_seed(base.seed, index).
PhantomSpec phantom_spec(const PhantomSpec& base, std::size_t index);

// Solid block of exactly `voxels` foreground voxels on a unit grid, filled
// layer by layer over a width x width cross-section inside a one-voxel margin.
VoxelVolume solid_block(std::size_t voxels, int width = 32);

// Writes `count` phantoms as dir/case_NNN/{defective,defect,complete} sidecars.
void write_phantom_set(const PhantomSpec& base, std::size_t count, const std::filesystem::path& dir);

}  // namespace data
}  // namespace shapefill
