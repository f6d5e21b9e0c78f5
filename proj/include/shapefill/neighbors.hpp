// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "shapefill/common.hpp"

namespace shapefill {

// Row-major Q x k neighbor table. Rows are ordered by (squared distance,
// reference index), so ties go to the smaller index.
struct KnnResult {
  std::size_t queries = 0;
  std::size_t k = 0;
  std::vector<std::size_t> indices;
  std::vector<double> distances;  // Euclidean

  std::size_t index(std::size_t q, std::size_t j) const { return indices[q * k + j]; }
  double distance(std::size_t q, std::size_t j) const { return distances[q * k + j]; }
};

// Working-set bounds for the blocked search: at most `queries` x `references`
// squared distances are materialized at a time.
struct KnnChunk {
  std::size_t queries = 512;
  std::size_t references = 4096;
};

namespace neighbors {

// Exact k nearest neighbors of every query point among `reference`.
// With exclude_self, query i and reference i denote the same point and
// reference i is skipped for row i. Squared distances are evaluated as
// dx*dx + dy*dy + dz*dz and rooted once at the end, so the result does not
// depend on the chunk sizes.
KnnResult knn(std::span<const Vec3> query, std::span<const Vec3> reference, std::size_t k, bool exclude_self,
              KnnChunk chunk = {});

// Transient bytes `knn` registers with memtrack for the given sizes.
std::size_t knn_workspace_bytes(std::size_t query_count, std::size_t reference_count, std::size_t k, KnnChunk chunk);

}  // namespace neighbors
}  // namespace shapefill
