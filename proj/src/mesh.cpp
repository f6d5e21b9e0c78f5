// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapefill/mesh.hpp"

#include <cstdint>
#include <cstring>
#include <map>
#include <sstream>
#include <unordered_map>

#include "io_util.hpp"
#include "shapefill/voxel.hpp"

namespace shapefill {

double TriangleMesh::area() const {
  double total = 0.0;
  for (const auto& t : triangles) {
    const Vec3 e1 = vertices[t[1]] - vertices[t[0]];
    const Vec3 e2 = vertices[t[2]] - vertices[t[0]];
    total += 0.5 * e1.cross(e2).norm();
  }
  return total;
}

namespace {

std::map<std::pair<int, int>, int> edge_counts(const TriangleMesh& m) {
  std::map<std::pair<int, int>, int> counts;
  for (const auto& t : m.triangles) {
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++counts[{a, b}];
    }
  }
  return counts;
}

}  // namespace

long TriangleMesh::euler_characteristic() const {
  return static_cast<long>(vertices.size()) - static_cast<long>(edge_counts(*this).size()) +
         static_cast<long>(triangles.size());
}

bool TriangleMesh::is_closed_manifold() const {
  for (const auto& [edge, n] : edge_counts(*this)) {
    if (n != 2) return false;
  }
  return !triangles.empty();
}

namespace voxel {

TriangleMesh extract_surface_mesh(const VoxelVolume& v) {
  if (v.empty_grid() || v.count() == 0) throw ValidationError("cannot mesh an empty volume");
  const Shape3& s = v.shape();
  auto sample = [&](int x, int y, int z) { return v.in_bounds(x, y, z) && v.at(x, y, z); };

  // Dual cell (x,y,z) spans voxel centers x..x+1 etc.; x ranges over [-1, n-1].
  const std::int64_t cx = s[0] + 1, cy = s[1] + 1;
  auto cell_key = [&](int x, int y, int z) {
    return (static_cast<std::int64_t>(z) + 1) * cx * cy + (static_cast<std::int64_t>(y) + 1) * cx + (x + 1);
  };

  TriangleMesh mesh;
  std::unordered_map<std::int64_t, int> cell_vertex;
  auto vertex_for = [&](int x, int y, int z) -> int {
    const auto key = cell_key(x, y, z);
    if (auto it = cell_vertex.find(key); it != cell_vertex.end()) return it->second;
    bool corner[2][2][2];
    for (int k = 0; k < 2; ++k)
      for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) corner[k][j][i] = sample(x + i, y + j, z + k);
    Vec3 sum = Vec3::Zero();
    int crossings = 0;
    for (int k = 0; k < 2; ++k)
      for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
          if (i == 0 && corner[k][j][0] != corner[k][j][1]) {
            sum += Vec3(x + 0.5, y + j, z + k);
            ++crossings;
          }
          if (j == 0 && corner[k][0][i] != corner[k][1][i]) {
            sum += Vec3(x + i, y + 0.5, z + k);
            ++crossings;
          }
          if (k == 0 && corner[0][j][i] != corner[1][j][i]) {
            sum += Vec3(x + i, y + j, z + 0.5);
            ++crossings;
          }
        }
    const Vec3 idx = sum / crossings;
    Vec3 world;
    for (int a = 0; a < 3; ++a) world[a] = v.origin()[a] + idx[a] * v.spacing()[a];
    const int id = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(world);
    cell_vertex.emplace(key, id);
    return id;
  };

  // Every grid edge whose endpoints differ emits one quad joining the four
  // dual cells around it.
  for (int z = -1; z < s[2]; ++z) {
    for (int y = -1; y < s[1]; ++y) {
      for (int x = -1; x < s[0]; ++x) {
        const bool here = sample(x, y, z);
        for (int axis = 0; axis < 3; ++axis) {
          int nx = x, ny = y, nz = z;
          (axis == 0 ? nx : axis == 1 ? ny : nz) += 1;
          if (sample(nx, ny, nz) == here) continue;
          // Cells around the edge, counter-clockwise in the (u, v) plane
          // where u = axis+1, v = axis+2.
          int cells[4][3];
          const int du[4] = {-1, 0, 0, -1};
          const int dv[4] = {-1, -1, 0, 0};
          const int u = (axis + 1) % 3, w = (axis + 2) % 3;
          for (int q = 0; q < 4; ++q) {
            int c[3] = {x, y, z};
            c[u] += du[q];
            c[w] += dv[q];
            cells[q][0] = c[0];
            cells[q][1] = c[1];
            cells[q][2] = c[2];
          }
          int ids[4];
          for (int q = 0; q < 4; ++q) ids[q] = vertex_for(cells[q][0], cells[q][1], cells[q][2]);
          if (here) {
            mesh.triangles.push_back({ids[0], ids[1], ids[2]});
            mesh.triangles.push_back({ids[0], ids[2], ids[3]});
          } else {
            mesh.triangles.push_back({ids[0], ids[2], ids[1]});
            mesh.triangles.push_back({ids[0], ids[3], ids[2]});
          }
        }
      }
    }
  }
  return mesh;
}

void write_stl(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::string out(80, '\0');
  const std::string header = "shapefill binary STL, units mm";
  std::memcpy(out.data(), header.data(), header.size());
  auto put_u32 = [&](std::uint32_t x) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((x >> (8 * b)) & 0xff));
  };
  auto put_f32 = [&](double d) {
    const float f = static_cast<float>(d);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(bits);
  };
  put_u32(static_cast<std::uint32_t>(mesh.triangles.size()));
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    Vec3 n = (b - a).cross(c - a);
    if (n.norm() > 0) n.normalize();
    for (int k = 0; k < 3; ++k) put_f32(n[k]);
    for (const Vec3* p : {&a, &b, &c})
      for (int k = 0; k < 3; ++k) put_f32((*p)[k]);
    out.push_back('\0');
    out.push_back('\0');
  }
  io::write_file_atomic(path, out);
}

void write_mesh_ply(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ostringstream ss;
  ss.precision(9);
  ss << "ply\nformat ascii 1.0\ncomment units mm\n"
     << "element vertex " << mesh.vertices.size() << "\nproperty float x\nproperty float y\nproperty float z\n"
     << "element face " << mesh.triangles.size() << "\nproperty list uchar int vertex_indices\nend_header\n";
  for (const Vec3& p : mesh.vertices) ss << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
  for (const auto& t : mesh.triangles) ss << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  io::write_file_atomic(path, ss.str());
}

}  // namespace voxel
}  // namespace shapefill
