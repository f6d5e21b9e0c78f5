// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapefill/objective.hpp"

#include <cmath>

#include "shapefill/cloud.hpp"
#include "shapefill/memtrack.hpp"

namespace shapefill {

void ObjectiveConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError("objective.alpha must be finite and >= 0");
  if (k < 2) throw ValidationError("objective.k must be >= 2");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ValidationError("objective.temperature must be finite and > 0");
  }
}

namespace objective {
namespace {

void require_nonempty(std::span<const Vec3> pr, std::span<const Vec3> pgt) {
  if (pr.empty() || pgt.empty()) throw ValidationError("objective: empty cloud");
}

// Nearest neighbor of each point of `from` in `to`.
KnnResult nearest(std::span<const Vec3> from, std::span<const Vec3> to) {
  return neighbors::knn(from, to, 1, false);
}

Vec3 unit_or_zero(const Vec3& v, double norm) { return norm > 0.0 ? Vec3(v / norm) : Vec3::Zero(); }

}  // namespace

LossValue chamfer(std::span<const Vec3> pr, std::span<const Vec3> pgt, bool with_gradient) {
  require_nonempty(pr, pgt);
  const KnnResult fwd = nearest(pr, pgt);
  const KnnResult bwd = nearest(pgt, pr);
  LossValue out;
  if (with_gradient) out.gradient.assign(pr.size(), Vec3::Zero());
  const double wf = 1.0 / static_cast<double>(pr.size());
  const double wb = 1.0 / static_cast<double>(pgt.size());
  double sf = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < pr.size(); ++i) {
    const Vec3 diff = pr[i] - pgt[fwd.index(i, 0)];
    sf += diff.squaredNorm();
    if (with_gradient) out.gradient[i] += 2.0 * wf * diff;
  }
  for (std::size_t j = 0; j < pgt.size(); ++j) {
    const std::size_t i = bwd.index(j, 0);
    const Vec3 diff = pr[i] - pgt[j];
    sb += diff.squaredNorm();
    if (with_gradient) out.gradient[i] += 2.0 * wb * diff;
  }
  out.value = sf * wf + sb * wb;
  return out;
}

LossValue extended_chamfer(std::span<const Vec3> pr, std::span<const Vec3> pgt, bool with_gradient) {
  require_nonempty(pr, pgt);
  const KnnResult fwd = nearest(pr, pgt);
  const KnnResult bwd = nearest(pgt, pr);
  double sf = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < pr.size(); ++i) sf += fwd.distance(i, 0);
  for (std::size_t j = 0; j < pgt.size(); ++j) sb += bwd.distance(j, 0);
  const double mf = sf / static_cast<double>(pr.size());
  const double mb = sb / static_cast<double>(pgt.size());
  LossValue out;
  out.value = std::max(mf, mb);
  if (!with_gradient) return out;
  out.gradient.assign(pr.size(), Vec3::Zero());
  if (mf >= mb) {
    const double w = 1.0 / static_cast<double>(pr.size());
    for (std::size_t i = 0; i < pr.size(); ++i) {
      const Vec3 diff = pr[i] - pgt[fwd.index(i, 0)];
      out.gradient[i] += w * unit_or_zero(diff, fwd.distance(i, 0));
    }
  } else {
    const double w = 1.0 / static_cast<double>(pgt.size());
    for (std::size_t j = 0; j < pgt.size(); ++j) {
      const std::size_t i = bwd.index(j, 0);
      const Vec3 diff = pr[i] - pgt[j];
      out.gradient[i] += w * unit_or_zero(diff, bwd.distance(j, 0));
    }
  }
  return out;
}

LossValue dacd(std::span<const Vec3> pr, std::span<const Vec3> pgt, double temperature, bool with_gradient) {
  require_nonempty(pr, pgt);
  if (!(temperature > 0.0)) throw ValidationError("dacd: temperature must be > 0");
  const KnnResult fwd = nearest(pr, pgt);
  const KnnResult bwd = nearest(pgt, pr);
  memtrack::Lease lease((pr.size() + pgt.size()) * sizeof(int));
  std::vector<int> hits_gt(pgt.size(), 0), hits_pr(pr.size(), 0);
  for (std::size_t i = 0; i < pr.size(); ++i) ++hits_gt[fwd.index(i, 0)];
  for (std::size_t j = 0; j < pgt.size(); ++j) ++hits_pr[bwd.index(j, 0)];

  LossValue out;
  if (with_gradient) out.gradient.assign(pr.size(), Vec3::Zero());
  const double wf = 0.5 / static_cast<double>(pr.size());
  const double wb = 0.5 / static_cast<double>(pgt.size());
  double sf = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < pr.size(); ++i) {
    const std::size_t j = fwd.index(i, 0);
    const double d = fwd.distance(i, 0);
    const double e = std::exp(-temperature * d) / hits_gt[j];
    sf += 1.0 - e;
    if (with_gradient) out.gradient[i] += wf * temperature * e * unit_or_zero(pr[i] - pgt[j], d);
  }
  for (std::size_t j = 0; j < pgt.size(); ++j) {
    const std::size_t i = bwd.index(j, 0);
    const double d = bwd.distance(j, 0);
    const double e = std::exp(-temperature * d) / hits_pr[i];
    sb += 1.0 - e;
    if (with_gradient) out.gradient[i] += wb * temperature * e * unit_or_zero(pr[i] - pgt[j], d);
  }
  out.value = sf * wf + sb * wb;
  return out;
}

LossValue uniformity_term(std::span<const Vec3> pr, int k, bool with_gradient) {
  if (k < 2) throw ValidationError("uniformity_term: k must be >= 2");
  if (pr.size() <= static_cast<std::size_t>(k)) throw ValidationError("uniformity_term: cloud too small for k");
  const auto kk = static_cast<std::size_t>(k);
  const KnnResult nn = neighbors::knn(pr, pr, kk, true);
  LossValue out;
  if (with_gradient) out.gradient.assign(pr.size(), Vec3::Zero());
  const double w = 1.0 / static_cast<double>(pr.size());
  double total = 0.0;
  std::vector<Vec3> unit(kk);
  for (std::size_t i = 0; i < pr.size(); ++i) {
    for (std::size_t a = 0; a < kk; ++a) {
      unit[a] = unit_or_zero(pr[i] - pr[nn.index(i, a)], nn.distance(i, a));
    }
    for (std::size_t a = 0; a < kk; ++a) {
      for (std::size_t b = a + 1; b < kk; ++b) {
        const double diff = nn.distance(i, a) - nn.distance(i, b);
        total += std::abs(diff);
        if (!with_gradient || diff == 0.0) continue;
        const double s = diff > 0.0 ? w : -w;
        // d(i,j) depends on p_i (+unit) and p_j (-unit).
        out.gradient[i] += s * (unit[a] - unit[b]);
        out.gradient[nn.index(i, a)] -= s * unit[a];
        out.gradient[nn.index(i, b)] += s * unit[b];
      }
    }
  }
  out.value = total * w;
  return out;
}

std::vector<double> uniformity_per_point(std::span<const Vec3> pr, int k) {
  if (k < 2) throw ValidationError("uniformity_term: k must be >= 2");
  if (pr.size() <= static_cast<std::size_t>(k)) throw ValidationError("uniformity_term: cloud too small for k");
  const auto kk = static_cast<std::size_t>(k);
  const KnnResult nn = neighbors::knn(pr, pr, kk, true);
  std::vector<double> out(pr.size(), 0.0);
  for (std::size_t i = 0; i < pr.size(); ++i) {
    for (std::size_t a = 0; a < kk; ++a) {
      for (std::size_t b = a + 1; b < kk; ++b) out[i] += std::abs(nn.distance(i, a) - nn.distance(i, b));
    }
  }
  return out;
}

LossValue evaluate(std::span<const Vec3> pr, std::span<const Vec3> pgt, const ObjectiveConfig& cfg,
                   bool with_gradient) {
  using Kind = ObjectiveConfig::Kind;
  switch (cfg.kind) {
    case Kind::cd:
      return chamfer(pr, pgt, with_gradient);
    case Kind::ecd:
      return extended_chamfer(pr, pgt, with_gradient);
    case Kind::dacd:
      return dacd(pr, pgt, cfg.temperature, with_gradient);
    case Kind::dacd_knn: {
      LossValue base = dacd(pr, pgt, cfg.temperature, with_gradient);
      if (cfg.alpha == 0.0) return base;
      const LossValue reg = uniformity_term(pr, cfg.k, with_gradient);
      base.value += cfg.alpha * reg.value;
      if (with_gradient) {
        for (std::size_t i = 0; i < pr.size(); ++i) base.gradient[i] += cfg.alpha * reg.gradient[i];
      }
      return base;
    }
  }
  throw ValidationError("unknown objective kind");
}

namespace {

void require_same_frame(const PointCloud& a, const PointCloud& b) {
  if (a.frame() != b.frame()) throw ValidationError("objective: clouds are in different frames");
}

}  // namespace

LossValue chamfer(const PointCloud& pr, const PointCloud& pgt) {
  require_same_frame(pr, pgt);
  return chamfer(pr.points(), pgt.points());
}

LossValue extended_chamfer(const PointCloud& pr, const PointCloud& pgt) {
  require_same_frame(pr, pgt);
  return extended_chamfer(pr.points(), pgt.points());
}

LossValue dacd(const PointCloud& pr, const PointCloud& pgt, const ObjectiveConfig& cfg) {
  require_same_frame(pr, pgt);
  return dacd(pr.points(), pgt.points(), cfg.temperature);
}

LossValue uniformity_term(const PointCloud& pr, int k) { return uniformity_term(pr.points(), k); }

LossValue evaluate(const PointCloud& pr, const PointCloud& pgt, const ObjectiveConfig& cfg) {
  require_same_frame(pr, pgt);
  cfg.validate();
  return evaluate(pr.points(), pgt.points(), cfg);
}

ObjectiveConfig::Kind parse_kind(std::string_view name) {
  using Kind = ObjectiveConfig::Kind;
  if (name == "cd") return Kind::cd;
  if (name == "ecd") return Kind::ecd;
  if (name == "dacd") return Kind::dacd;
  if (name == "dacd_knn") return Kind::dacd_knn;
  throw ValidationError("unknown objective kind '" + std::string(name) + "' (expected cd, ecd, dacd, dacd_knn)");
}

std::string to_string(ObjectiveConfig::Kind kind) {
  using Kind = ObjectiveConfig::Kind;
  switch (kind) {
    case Kind::cd:
      return "cd";
    case Kind::ecd:
      return "ecd";
    case Kind::dacd:
      return "dacd";
    case Kind::dacd_knn:
      return "dacd_knn";
  }
  return "?";
}

}  // namespace objective
}  // namespace shapefill
