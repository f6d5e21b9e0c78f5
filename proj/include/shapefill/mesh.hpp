// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "shapefill/common.hpp"

namespace shapefill {

class VoxelVolume;

// Indexed triangle mesh in world millimetres, counter-clockwise outward.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  double area() const;
  // V - E + F over the whole mesh.
  long euler_characteristic() const;
  // Every undirected edge is shared by exactly two triangles.
  bool is_closed_manifold() const;
};

namespace voxel {

// Iso-surface at level 0.5 of the voxel-center samples (naive surface nets:
// one vertex per dual cell at the mean of its edge crossings). The exterior
// of the grid counts as background, so every component is closed.
TriangleMesh extract_surface_mesh(const VoxelVolume& v);

void write_stl(const TriangleMesh& mesh, const std::filesystem::path& path);
void write_mesh_ply(const TriangleMesh& mesh, const std::filesystem::path& path);

}  // namespace voxel
}  // namespace shapefill
