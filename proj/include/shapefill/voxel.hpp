// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "shapefill/common.hpp"

namespace shapefill {

class PointCloud;

// Binary occupancy grid. Voxel (0,0,0) is centered at `origin` (mm); data is
// stored x-fastest, one byte per voxel holding 0 or 1.
class VoxelVolume {
 public:
  VoxelVolume() = default;
  VoxelVolume(Shape3 shape, Vec3 spacing, Vec3 origin);
  // Binarizes `data` (any non-zero byte becomes 1).
  VoxelVolume(Shape3 shape, Vec3 spacing, Vec3 origin, std::vector<std::uint8_t> data);

  const Shape3& shape() const { return shape_; }
  const Vec3& spacing() const { return spacing_; }
  const Vec3& origin() const { return origin_; }
  std::size_t size() const { return data_.size(); }
  bool empty_grid() const { return data_.empty(); }

  std::span<const std::uint8_t> data() const { return data_; }

  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(shape_[0]) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(shape_[1]) * static_cast<std::size_t>(z));
  }
  Shape3 coords(std::size_t idx) const;
  bool in_bounds(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < shape_[0] && y < shape_[1] && z < shape_[2];
  }

  bool at(int x, int y, int z) const { return data_[index(x, y, z)] != 0; }
  bool at(std::size_t idx) const { return data_[idx] != 0; }
  void set(int x, int y, int z, bool on) { data_[index(x, y, z)] = on ? 1 : 0; }
  void set(std::size_t idx, bool on) { data_[idx] = on ? 1 : 0; }

  Vec3 world_center(int x, int y, int z) const;

  // Number of foreground voxels.
  std::size_t count() const;

  // Same shape, spacing and origin.
  bool same_grid(const VoxelVolume& other) const;
  // Zero-filled volume on this grid.
  VoxelVolume blank_like() const { return VoxelVolume(shape_, spacing_, origin_); }

  friend bool operator==(const VoxelVolume& a, const VoxelVolume& b) {
    return a.same_grid(b) && a.data_ == b.data_;
  }

 private:
  Shape3 shape_{0, 0, 0};
  Vec3 spacing_{1.0, 1.0, 1.0};
  Vec3 origin_{0.0, 0.0, 0.0};
  std::vector<std::uint8_t> data_;
};

struct StructuringElement {
  enum class Kind { cross6, cube26 };
  Kind kind = Kind::cube26;
  int radius = 1;
};

enum class Connectivity { six = 6, twenty_six = 26 };

struct ComponentResult {
  VoxelVolume volume;
  bool empty = false;            // input had no foreground
  std::size_t components = 0;    // number of foreground components found
  std::size_t kept_voxels = 0;
};

struct VoxelizeResult {
  VoxelVolume volume;
  std::size_t dropped = 0;  // points outside the grid
};

namespace voxel {

// Reads either the JSON/RAW sidecar pair (path to the .json or the .raw) or a
// NRRD file. Data are binarized by value > 0.
VoxelVolume load_volume(const std::filesystem::path& path);

// Writes `<stem>.json` + `<stem>.raw` next to `path` (extension ignored).
void save_volume(const VoxelVolume& v, const std::filesystem::path& path);

// Positive voxels are those containing at least one denormalized point. A
// point on a shared face belongs to the lower-index voxel.
VoxelizeResult voxelize(const PointCloud& pc, const VoxelVolume& like);

VoxelVolume dilate(const VoxelVolume& v, const StructuringElement& se);
// `outside` is the value assumed beyond the grid border.
VoxelVolume erode(const VoxelVolume& v, const StructuringElement& se, bool outside);
VoxelVolume binary_closing(const VoxelVolume& v, const StructuringElement& se = {});

ComponentResult largest_component(const VoxelVolume& v, Connectivity c = Connectivity::twenty_six);

// defect AND NOT defective_input.
VoxelVolume subtract_overlap(const VoxelVolume& defect, const VoxelVolume& defective_input);

}  // namespace voxel
}  // namespace shapefill
