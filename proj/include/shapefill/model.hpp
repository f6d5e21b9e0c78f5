// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "shapefill/autodiff.hpp"
#include "shapefill/cloud.hpp"
#include "shapefill/common.hpp"

namespace shapefill {

// Geometry-aware completion transformer with a 3-D folding head.
//
// Each group of `group_in` normalized points is summarized by `n_proxies`
// farthest-point centers with local edge features, refined by encoder blocks
// (self-attention + kNN aggregation + feed-forward), pooled into
// `n_queries` coarse centers, refined by decoder blocks (self- and
// cross-attention) and finally folded: every query deforms a regular
// fold_seed^3 lattice into `fold_seed^3` output points.
struct ModelConfig {
  std::size_t group_in = 1024;
  std::size_t group_out = 512;
  std::size_t n_proxies = 128;
  std::size_t feat_dim = 128;
  std::size_t n_enc_blocks = 2;
  std::size_t n_dec_blocks = 2;
  std::size_t n_heads = 4;
  std::size_t knn_k = 8;
  std::size_t n_queries = 8;
  std::size_t fold_seed = 4;   // lattice points per axis
  double fold_radius = 0.05;   // lattice half-extent, normalized units

  // Hidden widths derived from feat_dim.
  std::size_t proxy_hidden() const { return std::max<std::size_t>(1, feat_dim / 2); }
  std::size_t ffn_hidden() const { return 2 * feat_dim; }
  std::size_t fold_hidden() const { return feat_dim; }
  static constexpr int kPositionFrequencies = 8;

  std::size_t lattice_size() const { return fold_seed * fold_seed * fold_seed; }

  // Throws ValidationError on a violated invariant.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Named parameter tensors plus the configuration they were built for.
struct ModelParams {
  static constexpr const char* kVersion = "shapefill-completion-v1";

  ModelConfig config;
  std::string version = kVersion;
  std::map<std::string, ad::Matrix> tensors;

  const ad::Matrix& at(const std::string& name) const;
  ad::Matrix& at(const std::string& name);

  // Every expected tensor present with the right shape and finite values.
  void check() const;
  std::size_t parameter_count() const;
};

struct Proxies {
  ad::Matrix centers;   // n_proxies x 3
  ad::Matrix features;  // n_proxies x feat_dim
  std::vector<std::size_t> center_indices;
};

struct Queries {
  ad::Matrix coarse_centers;  // n_queries x 3
  ad::Matrix features;        // n_queries x feat_dim
};

namespace model {

// Expected (rows, cols) of every parameter tensor, in a fixed order.
std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> parameter_shapes(const ModelConfig& cfg);

// Seeded Xavier-uniform weights, zero biases, unit layer-norm gains.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// Zeroes the output projections of every residual branch (and the
// coordinate embedding), making the encoder an identity map.
void zero_residual_branches(ModelParams& params);
// Zeroes the last folding layer: the head then emits translated seed lattices.
void zero_fold_offsets(ModelParams& params);

// Greedy farthest-point sampling from `start`; ties go to the smaller index.
std::vector<std::size_t> farthest_point_sampling(std::span<const Vec3> points, std::size_t count, std::size_t start);

// Regular fold_seed^3 lattice spanning [-fold_radius, fold_radius]^3, x fastest.
ad::Matrix seed_lattice(const ModelConfig& cfg);

Proxies extract_proxies(const PointCloud& group, const ModelParams& params, std::uint64_t seed);
ad::Matrix encode(const ad::Matrix& centers, const ad::Matrix& features, const ModelParams& params);
Queries generate_queries(const ad::Matrix& encoded, const ModelParams& params);
// Decoder blocks: queries attend to each other and to the encoded proxies.
ad::Matrix decode(const Queries& queries, const ad::Matrix& encoded, const ModelParams& params);
ad::Matrix fold3d(const ad::Matrix& coarse_centers, const ad::Matrix& query_features, const ModelParams& params);

// Full group completion: exactly group_out points in the group's frame.
PointCloud forward(const PointCloud& group, const ModelParams& params, std::uint64_t seed);

// Upper bound on the row norms of encode() output, given the largest row
// norm of the proxy features. Derived from Frobenius norms of the weights and
// the fact that layer-normalized rows have norm <= sqrt(D) max|gain| + |bias|.
double encoder_output_bound(const ModelParams& params, double feature_row_norm);

// Graph-level interface used by training: parameters become tape leaves.
class Graph {
 public:
  Graph(ad::Tape& tape, const ModelParams& params) : tape_(tape), params_(params) {}

  ad::Tape& tape() { return tape_; }
  const ModelParams& params() const { return params_; }
  const ModelConfig& config() const { return params_.config; }

  // Tape variable of a parameter (created on first use).
  ad::Var param(const std::string& name);

  // Gradients of every bound parameter after tape().backward().
  std::map<std::string, ad::Matrix> gradients() const;

  struct ProxyVars {
    ad::Matrix centers;
    ad::Var features;
    std::vector<std::size_t> center_indices;
  };
  struct QueryVars {
    ad::Var coarse_centers;
    ad::Var features;
  };

  ProxyVars extract_proxies(std::span<const Vec3> group, std::uint64_t seed);
  ad::Var encode(const ad::Matrix& centers, const ad::Var& features);
  QueryVars generate_queries(const ad::Var& encoded);
  ad::Var decode(const QueryVars& queries, const ad::Var& encoded);
  ad::Var fold3d(const ad::Var& coarse_centers, const ad::Var& query_features);
  // group_out x 3 output coordinates.
  ad::Var forward(std::span<const Vec3> group, std::uint64_t seed);

 private:
  ad::Var attention(const std::string& prefix, const ad::Var& queries, const ad::Var& keys_values);
  ad::Var feed_forward(const std::string& prefix, const ad::Var& x);
  ad::Var layer_norm(const std::string& prefix, const ad::Var& x);

  ad::Tape& tape_;
  const ModelParams& params_;
  std::unordered_map<std::string, ad::Var> bound_;
};

}  // namespace model
}  // namespace shapefill
