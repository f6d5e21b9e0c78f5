// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapefill/model.hpp"

#include <cmath>
#include <limits>

#include "shapefill/neighbors.hpp"
#include "shapefill/random.hpp"

namespace shapefill {
namespace {

constexpr double kEdgeScale = 10.0;

// `small` is Xavier scaled by kSmallGain, used by the layers that emit coordinates.
enum class Init { xavier, small, zero, one, spread };
constexpr double kSmallGain = 0.01;

struct TensorSpec {
  std::string name;
  Eigen::Index rows;
  Eigen::Index cols;
  Init init;
};

std::vector<TensorSpec> tensor_specs(const ModelConfig& cfg) {
  const auto D = static_cast<Eigen::Index>(cfg.feat_dim);
  const auto Hp = static_cast<Eigen::Index>(cfg.proxy_hidden());
  const auto F = static_cast<Eigen::Index>(cfg.ffn_hidden());
  const auto Hf = static_cast<Eigen::Index>(cfg.fold_hidden());
  const auto Q = static_cast<Eigen::Index>(cfg.n_queries);
  const Eigen::Index E = 3 * 2 * ModelConfig::kPositionFrequencies;

  std::vector<TensorSpec> s;
  auto w = [&](const std::string& n, Eigen::Index r, Eigen::Index c) { s.push_back({n, r, c, Init::xavier}); };
  auto b = [&](const std::string& n, Eigen::Index c) { s.push_back({n, 1, c, Init::zero}); };
  auto ln = [&](const std::string& n) {
    s.push_back({n + ".gain", 1, D, Init::one});
    s.push_back({n + ".bias", 1, D, Init::zero});
  };
  auto attn = [&](const std::string& n) {
    for (const char* p : {"q", "k", "v", "o"}) {
      w(n + ".w" + p, D, D);
      b(n + ".b" + p, D);
    }
  };
  auto ffn = [&](const std::string& n) {
    w(n + ".w1", D, F);
    b(n + ".b1", F);
    w(n + ".w2", F, D);
    b(n + ".b2", D);
  };

  w("proxy.w1", 6, Hp);
  b("proxy.b1", Hp);
  w("proxy.w2", Hp, D);
  b("proxy.b2", D);

  w("enc.pos.w", E, D);
  b("enc.pos.b", D);
  for (std::size_t i = 0; i < cfg.n_enc_blocks; ++i) {
    const std::string p = "enc" + std::to_string(i);
    ln(p + ".ln1");
    attn(p + ".attn");
    ln(p + ".ln2");
    w(p + ".local.w1a", D, D);
    w(p + ".local.w1b", D, D);
    b(p + ".local.b1", D);
    w(p + ".local.w2", D, D);
    b(p + ".local.b2", D);
    ln(p + ".ln3");
    ffn(p + ".ffn");
  }

  ln("qg.ln");
  w("qg.c.w1", D, D);
  b("qg.c.b1", D);
  s.push_back({"qg.c.w2", D, 3 * Q, Init::small});
  s.push_back({"qg.c.b2", 1, 3 * Q, Init::spread});
  w("qg.f.w1", D + 3, D);
  b("qg.f.b1", D);
  w("qg.f.w2", D, D);
  b("qg.f.b2", D);

  w("dec.pos.w", E, D);
  b("dec.pos.b", D);
  ln("dec.mem");
  for (std::size_t i = 0; i < cfg.n_dec_blocks; ++i) {
    const std::string p = "dec" + std::to_string(i);
    ln(p + ".ln1");
    attn(p + ".sa");
    ln(p + ".ln2");
    attn(p + ".ca");
    ln(p + ".ln3");
    ffn(p + ".ffn");
  }
  ln("dec.ln");

  for (const char* stage : {"fold1", "fold2"}) {
    const std::string p = stage;
    w(p + ".w1a", 3, Hf);
    w(p + ".w1b", D, Hf);
    b(p + ".b1", Hf);
    w(p + ".w2", Hf, Hf);
    b(p + ".b2", Hf);
    s.push_back({p + ".w3", Hf, 3, Init::small});
    b(p + ".b3", 3);
  }
  return s;
}

std::vector<Vec3> rows_to_points(const ad::Matrix& m) {
  std::vector<Vec3> pts(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) pts[static_cast<std::size_t>(r)] = Vec3(m(r, 0), m(r, 1), m(r, 2));
  return pts;
}

void require_finite(const ad::Matrix& m, const char* what) {
  if (!m.allFinite()) throw DivergenceError(std::string("non-finite values in ") + what);
}

auto shared_indices(std::vector<int> v) { return std::make_shared<const std::vector<int>>(std::move(v)); }

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw ValidationError(std::string("model config: ") + name + " must be >= 1");
  };
  positive(group_in, "group_in");
  positive(group_out, "group_out");
  positive(n_proxies, "n_proxies");
  positive(feat_dim, "feat_dim");
  positive(n_heads, "n_heads");
  positive(knn_k, "knn_k");
  positive(n_queries, "n_queries");
  positive(fold_seed, "fold_seed");
  if (n_queries * lattice_size() != group_out) {
    throw ValidationError("model config: n_queries * fold_seed^3 must equal group_out");
  }
  if (feat_dim % n_heads != 0) throw ValidationError("model config: feat_dim must be divisible by n_heads");
  if (n_proxies > group_in) throw ValidationError("model config: n_proxies exceeds group_in");
  if (knn_k > group_in) throw ValidationError("model config: knn_k exceeds group_in");
  if (knn_k >= n_proxies) throw ValidationError("model config: knn_k must be smaller than n_proxies");
  if (!(fold_radius >= 0.0) || !std::isfinite(fold_radius)) {
    throw ValidationError("model config: fold_radius must be finite and non-negative");
  }
}

const ad::Matrix& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ValidationError("missing model tensor: " + name);
  return it->second;
}

ad::Matrix& ModelParams::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ValidationError("missing model tensor: " + name);
  return it->second;
}

void ModelParams::check() const {
  config.validate();
  if (version != kVersion) throw ValidationError("unsupported model version: " + version);
  const auto shapes = model::parameter_shapes(config);
  if (shapes.size() != tensors.size()) throw ValidationError("model tensor count does not match config");
  for (const auto& [name, shape] : shapes) {
    const ad::Matrix& m = at(name);
    if (m.rows() != shape.first || m.cols() != shape.second) {
      throw ValidationError("model tensor " + name + " has shape " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", expected " + std::to_string(shape.first) + "x" +
                            std::to_string(shape.second));
    }
    if (!m.allFinite()) throw ValidationError("model tensor " + name + " is not finite");
  }
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, m] : tensors) n += static_cast<std::size_t>(m.size());
  return n;
}

namespace model {

std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> parameter_shapes(const ModelConfig& cfg) {
  std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> out;
  for (const TensorSpec& t : tensor_specs(cfg)) out.push_back({t.name, {t.rows, t.cols}});
  return out;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams p;
  p.config = cfg;
  Rng rng(seed);
  for (const TensorSpec& t : tensor_specs(cfg)) {
    ad::Matrix m(t.rows, t.cols);
    switch (t.init) {
      case Init::xavier:
      case Init::small: {
        const double gain = t.init == Init::small ? kSmallGain : 1.0;
        const double limit = gain * std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
        break;
      }
      case Init::zero: m.setZero(); break;
      case Init::one: m.setOnes(); break;
      case Init::spread:
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(0.2, 0.8);
        break;
    }
    p.tensors.emplace(t.name, std::move(m));
  }
  return p;
}

void zero_residual_branches(ModelParams& params) {
  params.at("enc.pos.w").setZero();
  params.at("enc.pos.b").setZero();
  for (std::size_t i = 0; i < params.config.n_enc_blocks; ++i) {
    const std::string p = "enc" + std::to_string(i);
    for (const char* n : {".attn.wo", ".attn.bo", ".local.w2", ".local.b2", ".ffn.w2", ".ffn.b2"}) {
      params.at(p + n).setZero();
    }
  }
}

void zero_fold_offsets(ModelParams& params) {
  params.at("fold2.w3").setZero();
  params.at("fold2.b3").setZero();
}

std::vector<std::size_t> farthest_point_sampling(std::span<const Vec3> points, std::size_t count, std::size_t start) {
  if (count > points.size()) throw ValidationError("farthest_point_sampling: count exceeds point count");
  if (count == 0) return {};
  if (start >= points.size()) throw ValidationError("farthest_point_sampling: start index out of range");
  std::vector<double> dist(points.size(), std::numeric_limits<double>::infinity());
  std::vector<std::size_t> out;
  out.reserve(count);
  std::size_t current = start;
  for (std::size_t it = 0; it < count; ++it) {
    out.push_back(current);
    dist[current] = -1.0;  // selected
    const Vec3& c = points[current];
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (dist[i] < 0.0) continue;
      const double dx = points[i].x() - c.x();
      const double dy = points[i].y() - c.y();
      const double dz = points[i].z() - c.z();
      const double d = dx * dx + dy * dy + dz * dz;
      if (d < dist[i]) dist[i] = d;
      if (dist[i] > best_d) {
        best_d = dist[i];
        best = i;
      }
    }
    current = best;
  }
  return out;
}

ad::Matrix seed_lattice(const ModelConfig& cfg) {
  const std::size_t s = cfg.fold_seed;
  ad::Matrix m(static_cast<Eigen::Index>(s * s * s), 3);
  auto coord = [&](std::size_t i) {
    if (s == 1) return 0.0;
    return cfg.fold_radius * (2.0 * static_cast<double>(i) / static_cast<double>(s - 1) - 1.0);
  };
  Eigen::Index r = 0;
  for (std::size_t z = 0; z < s; ++z) {
    for (std::size_t y = 0; y < s; ++y) {
      for (std::size_t x = 0; x < s; ++x, ++r) {
        m(r, 0) = coord(x);
        m(r, 1) = coord(y);
        m(r, 2) = coord(z);
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

ad::Var Graph::param(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  ad::Var v = tape_.leaf(params_.at(name));
  bound_.emplace(name, v);
  return v;
}

std::map<std::string, ad::Matrix> Graph::gradients() const {
  std::map<std::string, ad::Matrix> out;
  for (const auto& [name, v] : bound_) out.emplace(name, tape_.grad(v));
  return out;
}

ad::Var Graph::layer_norm(const std::string& prefix, const ad::Var& x) {
  return ad::layer_norm(x, param(prefix + ".gain"), param(prefix + ".bias"));
}

ad::Var Graph::feed_forward(const std::string& prefix, const ad::Var& x) {
  ad::Var h = ad::relu(ad::linear(x, param(prefix + ".w1"), param(prefix + ".b1")));
  return ad::linear(h, param(prefix + ".w2"), param(prefix + ".b2"));
}

ad::Var Graph::attention(const std::string& prefix, const ad::Var& queries, const ad::Var& keys_values) {
  const auto heads = static_cast<Eigen::Index>(config().n_heads);
  const Eigen::Index dh = static_cast<Eigen::Index>(config().feat_dim) / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  ad::Var q = ad::linear(queries, param(prefix + ".wq"), param(prefix + ".bq"));
  ad::Var k = ad::linear(keys_values, param(prefix + ".wk"), param(prefix + ".bk"));
  ad::Var v = ad::linear(keys_values, param(prefix + ".wv"), param(prefix + ".bv"));
  std::vector<ad::Var> outs;
  for (Eigen::Index h = 0; h < heads; ++h) {
    ad::Var qh = heads == 1 ? q : ad::slice_cols(q, h * dh, dh);
    ad::Var kh = heads == 1 ? k : ad::slice_cols(k, h * dh, dh);
    ad::Var vh = heads == 1 ? v : ad::slice_cols(v, h * dh, dh);
    ad::Var a = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), inv));
    outs.push_back(ad::matmul(a, vh));
  }
  ad::Var o = heads == 1 ? outs.front() : ad::concat_cols(outs);
  return ad::linear(o, param(prefix + ".wo"), param(prefix + ".bo"));
}

Graph::ProxyVars Graph::extract_proxies(std::span<const Vec3> group, std::uint64_t seed) {
  const ModelConfig& cfg = config();
  if (group.size() != cfg.group_in) {
    throw ValidationError("extract_proxies: group has " + std::to_string(group.size()) + " points, expected " +
                          std::to_string(cfg.group_in));
  }
  Rng rng(seed);
  ProxyVars out;
  out.center_indices = farthest_point_sampling(group, cfg.n_proxies, rng.index(group.size()));
  const auto n = static_cast<Eigen::Index>(cfg.n_proxies);
  const auto k = static_cast<Eigen::Index>(cfg.knn_k);
  std::vector<Vec3> centers(cfg.n_proxies);
  out.centers.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    centers[static_cast<std::size_t>(i)] = group[out.center_indices[static_cast<std::size_t>(i)]];
    out.centers.row(i) = centers[static_cast<std::size_t>(i)].transpose();
  }
  const KnnResult nn = neighbors::knn(centers, group, cfg.knn_k, false);
  ad::Matrix edges(n * k, 6);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3& c = centers[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < k; ++j) {
      const Vec3& p = group[nn.index(static_cast<std::size_t>(i), static_cast<std::size_t>(j))];
      const Eigen::Index r = i * k + j;
      for (int a = 0; a < 3; ++a) {
        edges(r, a) = (p[a] - c[a]) * kEdgeScale;
        edges(r, 3 + a) = c[a];
      }
    }
  }
  ad::Var e = tape_.constant(std::move(edges));
  ad::Var h = ad::relu(ad::linear(e, param("proxy.w1"), param("proxy.b1")));
  h = ad::linear(h, param("proxy.w2"), param("proxy.b2"));
  out.features = ad::max_pool_rows(h, k);
  return out;
}

ad::Var Graph::encode(const ad::Matrix& centers, const ad::Var& features) {
  const ModelConfig& cfg = config();
  const Eigen::Index n = features.rows();
  if (centers.rows() != n || centers.cols() != 3 || features.cols() != static_cast<Eigen::Index>(cfg.feat_dim)) {
    throw ValidationError("encode: center/feature shapes do not match the config");
  }
  const auto k = static_cast<Eigen::Index>(cfg.knn_k);
  const std::vector<Vec3> pts = rows_to_points(centers);
  const KnnResult nn = neighbors::knn(pts, pts, cfg.knn_k, true);
  std::vector<int> nbr(static_cast<std::size_t>(n * k));
  std::vector<int> self(static_cast<std::size_t>(n * k));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto r = static_cast<std::size_t>(i * k + j);
      nbr[r] = static_cast<int>(nn.index(static_cast<std::size_t>(i), static_cast<std::size_t>(j)));
      self[r] = static_cast<int>(i);
    }
  }
  auto nbr_idx = shared_indices(std::move(nbr));
  auto self_idx = shared_indices(std::move(self));

  ad::Var c = tape_.constant(centers);
  ad::Var pos = ad::linear(ad::sinusoidal(c, ModelConfig::kPositionFrequencies), param("enc.pos.w"),
                           param("enc.pos.b"));
  ad::Var x = ad::add(features, pos);
  for (std::size_t b = 0; b < cfg.n_enc_blocks; ++b) {
    const std::string p = "enc" + std::to_string(b);
    ad::Var h = layer_norm(p + ".ln1", x);
    x = ad::add(x, attention(p + ".attn", h, h));

    // Edge MLP on [f_j - f_i, f_i] with the first layer split by input half.
    h = layer_norm(p + ".ln2", x);
    ad::Var a = ad::matmul(h, param(p + ".local.w1a"));
    ad::Var bb = ad::linear(h, param(p + ".local.w1b"), param(p + ".local.b1"));
    ad::Var pre = ad::add(ad::sub(ad::gather_rows(a, nbr_idx), ad::gather_rows(a, self_idx)),
                          ad::gather_rows(bb, self_idx));
    ad::Var pooled = ad::max_pool_rows(ad::relu(pre), k);
    x = ad::add(x, ad::linear(pooled, param(p + ".local.w2"), param(p + ".local.b2")));

    h = layer_norm(p + ".ln3", x);
    x = ad::add(x, feed_forward(p + ".ffn", h));
  }
  return x;
}

Graph::QueryVars Graph::generate_queries(const ad::Var& encoded) {
  const ModelConfig& cfg = config();
  const auto q = static_cast<Eigen::Index>(cfg.n_queries);
  if (encoded.cols() != static_cast<Eigen::Index>(cfg.feat_dim)) {
    throw ValidationError("generate_queries: encoded features have the wrong width");
  }
  ad::Var g = ad::max_pool_rows(layer_norm("qg.ln", encoded), encoded.rows());
  ad::Var h = ad::relu(ad::linear(g, param("qg.c.w1"), param("qg.c.b1")));
  QueryVars out;
  out.coarse_centers = ad::reshape(ad::linear(h, param("qg.c.w2"), param("qg.c.b2")), q, 3);
  ad::Var rep = ad::gather_rows(g, shared_indices(std::vector<int>(static_cast<std::size_t>(q), 0)));
  ad::Var in = ad::concat_cols({rep, out.coarse_centers});
  h = ad::relu(ad::linear(in, param("qg.f.w1"), param("qg.f.b1")));
  out.features = ad::linear(h, param("qg.f.w2"), param("qg.f.b2"));
  return out;
}

ad::Var Graph::decode(const QueryVars& queries, const ad::Var& encoded) {
  const ModelConfig& cfg = config();
  ad::Var pos = ad::linear(ad::sinusoidal(queries.coarse_centers, ModelConfig::kPositionFrequencies),
                           param("dec.pos.w"), param("dec.pos.b"));
  ad::Var x = ad::add(queries.features, pos);
  ad::Var memory = layer_norm("dec.mem", encoded);
  for (std::size_t b = 0; b < cfg.n_dec_blocks; ++b) {
    const std::string p = "dec" + std::to_string(b);
    ad::Var h = layer_norm(p + ".ln1", x);
    x = ad::add(x, attention(p + ".sa", h, h));
    h = layer_norm(p + ".ln2", x);
    x = ad::add(x, attention(p + ".ca", h, memory));
    h = layer_norm(p + ".ln3", x);
    x = ad::add(x, feed_forward(p + ".ffn", h));
  }
  return layer_norm("dec.ln", x);
}

ad::Var Graph::fold3d(const ad::Var& coarse_centers, const ad::Var& query_features) {
  const ModelConfig& cfg = config();
  const auto q = static_cast<Eigen::Index>(cfg.n_queries);
  const auto s3 = static_cast<Eigen::Index>(cfg.lattice_size());
  if (coarse_centers.rows() != q || coarse_centers.cols() != 3 || query_features.rows() != q ||
      query_features.cols() != static_cast<Eigen::Index>(cfg.feat_dim)) {
    throw ValidationError("fold3d: inputs do not match the config");
  }
  const ad::Matrix seed = seed_lattice(cfg);
  ad::Matrix tiled(q * s3, 3);
  std::vector<int> rep(static_cast<std::size_t>(q * s3));
  for (Eigen::Index i = 0; i < q; ++i) {
    tiled.middleRows(i * s3, s3) = seed;
    for (Eigen::Index j = 0; j < s3; ++j) rep[static_cast<std::size_t>(i * s3 + j)] = static_cast<int>(i);
  }
  auto rep_idx = shared_indices(std::move(rep));
  ad::Var lattice = tape_.constant(std::move(tiled));

  auto stage = [&](const std::string& p, const ad::Var& coords) {
    ad::Var per_query = ad::linear(query_features, param(p + ".w1b"), param(p + ".b1"));
    ad::Var h = ad::relu(ad::add(ad::matmul(coords, param(p + ".w1a")), ad::gather_rows(per_query, rep_idx)));
    h = ad::relu(ad::linear(h, param(p + ".w2"), param(p + ".b2")));
    return ad::linear(h, param(p + ".w3"), param(p + ".b3"));
  };
  ad::Var o1 = stage("fold1", lattice);
  ad::Var o2 = stage("fold2", o1);
  return ad::add(ad::add(ad::gather_rows(coarse_centers, rep_idx), lattice), o2);
}

ad::Var Graph::forward(std::span<const Vec3> group, std::uint64_t seed) {
  ProxyVars proxies = extract_proxies(group, seed);
  ad::Var encoded = encode(proxies.centers, proxies.features);
  QueryVars queries = generate_queries(encoded);
  ad::Var decoded = decode(queries, encoded);
  return fold3d(queries.coarse_centers, decoded);
}

// ---------------------------------------------------------------------------
// Value-level interface
// ---------------------------------------------------------------------------

Proxies extract_proxies(const PointCloud& group, const ModelParams& params, std::uint64_t seed) {
  ad::Tape tape(false);
  Graph g(tape, params);
  Graph::ProxyVars v = g.extract_proxies(group.points(), seed);
  return Proxies{std::move(v.centers), v.features.value(), std::move(v.center_indices)};
}

ad::Matrix encode(const ad::Matrix& centers, const ad::Matrix& features, const ModelParams& params) {
  ad::Tape tape(false);
  Graph g(tape, params);
  ad::Matrix out = g.encode(centers, tape.constant(features)).value();
  require_finite(out, "encoder output");
  return out;
}

Queries generate_queries(const ad::Matrix& encoded, const ModelParams& params) {
  ad::Tape tape(false);
  Graph g(tape, params);
  Graph::QueryVars v = g.generate_queries(tape.constant(encoded));
  return Queries{v.coarse_centers.value(), v.features.value()};
}

ad::Matrix decode(const Queries& queries, const ad::Matrix& encoded, const ModelParams& params) {
  ad::Tape tape(false);
  Graph g(tape, params);
  Graph::QueryVars v{tape.constant(queries.coarse_centers), tape.constant(queries.features)};
  return g.decode(v, tape.constant(encoded)).value();
}

ad::Matrix fold3d(const ad::Matrix& coarse_centers, const ad::Matrix& query_features, const ModelParams& params) {
  ad::Tape tape(false);
  Graph g(tape, params);
  return g.fold3d(tape.constant(coarse_centers), tape.constant(query_features)).value();
}

PointCloud forward(const PointCloud& group, const ModelParams& params, std::uint64_t seed) {
  if (group.frame() != Frame::normalized) throw ValidationError("forward: group must be in the normalized frame");
  ad::Tape tape(false);
  Graph g(tape, params);
  const ad::Matrix& out = g.forward(group.points(), seed).value();
  require_finite(out, "model output");
  return group.with_points(rows_to_points(out));
}

double encoder_output_bound(const ModelParams& params, double feature_row_norm) {
  const ModelConfig& cfg = params.config;
  auto fro = [&](const std::string& n) { return params.at(n).norm(); };
  auto ln_bound = [&](const std::string& n) {
    return std::sqrt(static_cast<double>(cfg.feat_dim)) * params.at(n + ".gain").cwiseAbs().maxCoeff() +
           fro(n + ".bias");
  };
  // Every (coordinate, frequency) pair contributes sin^2 + cos^2 = 1.
  const double pos_norm = std::sqrt(3.0 * ModelConfig::kPositionFrequencies);
  double x = feature_row_norm + pos_norm * fro("enc.pos.w") + fro("enc.pos.b");
  const double heads = std::sqrt(static_cast<double>(cfg.n_heads));
  const double pool = std::sqrt(static_cast<double>(cfg.knn_k));
  for (std::size_t b = 0; b < cfg.n_enc_blocks; ++b) {
    const std::string p = "enc" + std::to_string(b);
    // Each head output is a convex combination of value rows.
    double l = ln_bound(p + ".ln1");
    const double attn = heads * (l * fro(p + ".attn.wv") + fro(p + ".attn.bv")) * fro(p + ".attn.wo") +
                        fro(p + ".attn.bo");
    // |f_j - f_i| <= 2l; the max over K non-negative rows is at most sqrt(K) times the largest.
    l = ln_bound(p + ".ln2");
    const double pre = 2.0 * l * fro(p + ".local.w1a") + l * fro(p + ".local.w1b") + fro(p + ".local.b1");
    const double local = pool * pre * fro(p + ".local.w2") + fro(p + ".local.b2");
    l = ln_bound(p + ".ln3");
    const double ffn = (l * fro(p + ".ffn.w1") + fro(p + ".ffn.b1")) * fro(p + ".ffn.w2") + fro(p + ".ffn.b2");
    x += attn + local + ffn;
  }
  return x;
}

}  // namespace model
}  // namespace shapefill
