// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapefill/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shapefill/memtrack.hpp"

namespace shapefill::neighbors {

std::size_t knn_workspace_bytes(std::size_t query_count, std::size_t reference_count, std::size_t k, KnnChunk chunk) {
  const std::size_t cq = std::min(chunk.queries, query_count);
  const std::size_t cr = std::min(chunk.references, reference_count);
  return cq * cr * sizeof(double) + cq * k * (sizeof(double) + sizeof(std::size_t));
}

KnnResult knn(std::span<const Vec3> query, std::span<const Vec3> reference, std::size_t k, bool exclude_self,
              KnnChunk chunk) {
  if (query.empty() || reference.empty()) throw ValidationError("knn: empty input");
  if (k < 1) throw ValidationError("knn: k must be >= 1");
  if (chunk.queries < 1 || chunk.references < 1) throw ValidationError("knn: chunk sizes must be >= 1");
  if (exclude_self && query.size() != reference.size()) {
    throw ValidationError("knn: exclude_self needs query and reference to be the same set");
  }
  const std::size_t available = reference.size() - (exclude_self ? 1 : 0);
  if (k > available) throw ValidationError("knn: k exceeds the number of candidate neighbors");
  const auto finite = [](const Vec3& p) { return p.allFinite(); };
  if (!std::all_of(query.begin(), query.end(), finite) || !std::all_of(reference.begin(), reference.end(), finite)) {
    throw ValidationError("knn: non-finite point");
  }

  KnnResult result;
  result.queries = query.size();
  result.k = k;
  result.indices.resize(query.size() * k);
  result.distances.resize(query.size() * k);

  const std::size_t cq = std::min(chunk.queries, query.size());
  const std::size_t cr = std::min(chunk.references, reference.size());
  memtrack::Lease lease(knn_workspace_bytes(query.size(), reference.size(), k, chunk));
  std::vector<double> block(cq * cr);
  std::vector<double> best_d(cq * k);
  std::vector<std::size_t> best_i(cq * k);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  for (std::size_t q0 = 0; q0 < query.size(); q0 += cq) {
    const std::size_t nq = std::min(cq, query.size() - q0);
    std::fill(best_d.begin(), best_d.end(), kInf);
    std::fill(best_i.begin(), best_i.end(), kNone);
    for (std::size_t r0 = 0; r0 < reference.size(); r0 += cr) {
      const std::size_t nr = std::min(cr, reference.size() - r0);
      for (std::size_t a = 0; a < nq; ++a) {
        const Vec3& p = query[q0 + a];
        double* row = block.data() + a * cr;
        for (std::size_t b = 0; b < nr; ++b) {
          const Vec3& r = reference[r0 + b];
          const double dx = p[0] - r[0];
          const double dy = p[1] - r[1];
          const double dz = p[2] - r[2];
          row[b] = dx * dx + dy * dy + dz * dz;
        }
      }
      for (std::size_t a = 0; a < nq; ++a) {
        const double* row = block.data() + a * cr;
        double* bd = best_d.data() + a * k;
        std::size_t* bi = best_i.data() + a * k;
        for (std::size_t b = 0; b < nr; ++b) {
          const std::size_t ref = r0 + b;
          if (exclude_self && ref == q0 + a) continue;
          const double d = row[b];
          // References arrive in increasing index order, so equal distances
          // never displace an earlier (smaller) index. Empty slots accept
          // overflowed (infinite) distances.
          if (!(d < bd[k - 1]) && bi[k - 1] != kNone) continue;
          std::size_t pos = k - 1;
          while (pos > 0 && (d < bd[pos - 1] || bi[pos - 1] == kNone)) {
            bd[pos] = bd[pos - 1];
            bi[pos] = bi[pos - 1];
            --pos;
          }
          bd[pos] = d;
          bi[pos] = ref;
        }
      }
    }
    for (std::size_t a = 0; a < nq; ++a) {
      for (std::size_t j = 0; j < k; ++j) {
        result.indices[(q0 + a) * k + j] = best_i[a * k + j];
        result.distances[(q0 + a) * k + j] = std::sqrt(best_d[a * k + j]);
      }
    }
  }
  return result;
}

}  // namespace shapefill::neighbors
