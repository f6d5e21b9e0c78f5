// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Geometry>

#include "shapefill/common.hpp"

namespace shapefill {

class VoxelVolume;

// Isotropic map between world millimetres and the unit frame:
// normalized = (world - shift) / scale.
struct NormTransform {
  Vec3 shift = Vec3::Zero();
  double scale = 1.0;

  Vec3 to_normalized(const Vec3& world) const { return (world - shift) / scale; }
  Vec3 to_world(const Vec3& normalized) const { return normalized * scale + shift; }

  friend bool operator==(const NormTransform& a, const NormTransform& b) {
    return a.shift == b.shift && a.scale == b.scale;
  }
};

enum class Frame { world_mm, normalized };

// Unordered set of 3-D points. Normalized clouds always carry the transform
// that maps them back to world coordinates.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> points);  // world frame
  PointCloud(std::vector<Vec3> points, NormTransform transform);  // normalized frame

  std::span<const Vec3> points() const { return points_; }
  const Vec3& operator[](std::size_t i) const { return points_[i]; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  Frame frame() const { return frame_; }
  const std::optional<NormTransform>& transform() const { return transform_; }

  // Same frame and transform, new coordinates.
  PointCloud with_points(std::vector<Vec3> points) const;

  // Largest allowed excursion outside [0,1] for normalized coordinates.
  static constexpr double kNormalizedSlack = 0.1;
  // Throws ValidationError if a normalized coordinate leaves [-slack, 1+slack].
  void check_normalized_range() const;

 private:
  std::vector<Vec3> points_;
  Frame frame_ = Frame::world_mm;
  std::optional<NormTransform> transform_;
};

// Partition of a cloud into equal-size index groups.
struct GroupSplit {
  std::vector<std::vector<std::size_t>> groups;  // indices into the source cloud
  std::vector<std::size_t> permutation;          // permuted order of source indices
  std::size_t group_in = 0;
  std::size_t group_out = 0;
  std::size_t padding = 0;  // resampled indices appended to the last group

  // Number of leading entries of `groups[g]` that are not padding.
  std::size_t valid_count(std::size_t g) const {
    return g + 1 == groups.size() ? group_in - padding : group_in;
  }
};

struct AugmentConfig {
  double max_crop_fraction = 0.0;  // fraction of points a planar crop may remove
  double max_angle = 0.0;          // radians
  double max_shift = 0.0;          // normalized units, per axis
};

// Rigid motion applied by `augment`: x -> rotation * (x - center) + center + translation.
struct RigidMotion {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 center = Vec3::Zero();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * (p - center) + center + translation; }
};

struct Augmented {
  PointCloud cloud;
  RigidMotion motion;
};

namespace cloud {

// One point per foreground voxel at its world-space center, in linear index order.
PointCloud cloud_from_volume(const VoxelVolume& v);

// shift = per-axis minimum, scale = longest axis extent.
PointCloud normalize(const PointCloud& pc);
PointCloud denormalize(const PointCloud& pc);

// N = ceil(P / group_in) groups of exactly group_in indices; the last group
// is padded by resampling with replacement.
GroupSplit split_groups(const PointCloud& pc, std::size_t group_in, std::uint64_t seed,
                        std::size_t group_out = 0);

// Points of `pc` selected by `indices`, same frame and transform.
PointCloud gather(const PointCloud& pc, std::span<const std::size_t> indices);

// Concatenation in argument order.
PointCloud merge(std::span<const PointCloud> clouds);

// Adds N(0, sigma^2) to every coordinate.
PointCloud jitter(const PointCloud& pc, double sigma, std::uint64_t seed);

// Permutation, planar crop, rotation about the centroid, translation.
Augmented augment(const PointCloud& pc, const AugmentConfig& cfg, std::uint64_t seed);

// `count` indices drawn uniformly: a random subset if count <= size,
// otherwise every index once plus resampled extras.
std::vector<std::size_t> sample_indices(std::size_t size, std::size_t count, std::uint64_t seed);

// PLY with float32 x,y,z. Normalized clouds carry a `comment norm sx sy sz scale` line.
void write_ply(const PointCloud& pc, const std::filesystem::path& path, bool binary = false);
PointCloud read_ply(const std::filesystem::path& path);

}  // namespace cloud
}  // namespace shapefill
