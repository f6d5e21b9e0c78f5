// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapefill/train.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

#include "io_util.hpp"
#include "shapefill/config.hpp"
#include "shapefill/random.hpp"
#include "shapefill/voxel.hpp"

namespace shapefill {

void TrainConfig::validate() const {
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  if (steps == 0) throw ValidationError("train.steps must be >= 1");
  if (!std::isfinite(learning_rate) || learning_rate < 0.0) throw ValidationError("train.learning_rate must be >= 0");
  if (!std::isfinite(final_learning_rate) || final_learning_rate < 0.0 || final_learning_rate > learning_rate) {
    throw ValidationError("train.final_learning_rate must be in [0, learning_rate]");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("train.beta1 and train.beta2 must be in [0, 1)");
  }
  if (!positive(epsilon)) throw ValidationError("train.epsilon must be > 0");
  if (!std::isfinite(grad_clip) || grad_clip < 0.0) throw ValidationError("train.grad_clip must be >= 0");
  if (batch_groups == 0) throw ValidationError("train.batch_groups must be >= 1");
  if (!(augment.max_crop_fraction >= 0.0 && augment.max_crop_fraction < 1.0) || !(augment.max_angle >= 0.0) ||
      !(augment.max_shift >= 0.0)) {
    throw ValidationError("train.augment values must be non-negative and crop < 1");
  }
}

namespace train {
namespace {

constexpr std::uint64_t kTargetStream = 0x7461726765747300ULL;
constexpr std::uint64_t kEvalStream = 0x6576616c75617465ULL;

std::uint64_t target_seed(std::uint64_t seed, std::size_t sample) {
  return derive_seed(derive_seed(seed, kTargetStream), sample);
}

ad::Matrix to_matrix(std::span<const Vec3> pts) {
  ad::Matrix m(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return m;
}

std::vector<Vec3> to_points(const ad::Matrix& m) {
  std::vector<Vec3> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m.row(i).transpose();
  return out;
}

bool all_finite(const std::map<std::string, ad::Matrix>& grads) {
  for (const auto& [name, g] : grads) {
    if (!g.allFinite()) return false;
  }
  return true;
}

// One group's loss; gradients are scaled by `weight` and added into `grads`.
double group_step(const ModelParams& params, const PointCloud& input, std::span<const Vec3> target,
                  const ObjectiveConfig& objective, std::uint64_t forward_seed, double weight,
                  std::map<std::string, ad::Matrix>& grads) {
  ad::Tape tape;
  model::Graph graph(tape, params);
  ad::Var out = graph.forward(input.points(), forward_seed);
  if (!out.value().allFinite()) return std::numeric_limits<double>::quiet_NaN();
  const std::vector<Vec3> pred = to_points(out.value());
  const LossValue loss = objective::evaluate(pred, target, objective);
  if (!std::isfinite(loss.value)) return loss.value;
  tape.backward(out, to_matrix(loss.gradient) * weight);
  for (auto& [name, g] : graph.gradients()) {
    auto it = grads.find(name);
    if (it == grads.end()) {
      grads.emplace(name, std::move(g));
    } else {
      it->second += g;
    }
  }
  return loss.value;
}

}  // namespace

TrainSample make_sample(const VoxelVolume& defective, const VoxelVolume& defect, std::string id) {
  if (!defective.same_grid(defect)) throw ValidationError("training pair " + id + ": grids differ");
  const PointCloud input = cloud::normalize(cloud::cloud_from_volume(defective));
  const PointCloud raw = cloud::cloud_from_volume(defect);
  if (input.empty() || raw.empty()) throw ValidationError("training pair " + id + ": empty volume");
  const NormTransform& t = *input.transform();
  std::vector<Vec3> mapped;
  mapped.reserve(raw.size());
  for (const Vec3& p : raw.points()) mapped.push_back(t.to_normalized(p));
  return {std::move(id), input, PointCloud(std::move(mapped), t)};
}

std::vector<Vec3> training_target(const TrainSample& sample, std::size_t group_out, std::uint64_t seed) {
  const auto idx = cloud::sample_indices(sample.target.size(), group_out, seed);
  std::vector<Vec3> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(sample.target[i]);
  return out;
}

TrainState initial_state(const ModelConfig& cfg, std::uint64_t seed) {
  TrainState s;
  s.params = model::init_params(cfg, seed);
  return s;
}

double learning_rate(const TrainConfig& cfg, std::uint64_t step) {
  if (step < cfg.warmup_steps) {
    return cfg.learning_rate * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps);
  }
  const double span = static_cast<double>(cfg.steps - std::min(cfg.steps, cfg.warmup_steps));
  const double progress = span > 0 ? std::min(1.0, static_cast<double>(step - cfg.warmup_steps) / span) : 1.0;
  return cfg.final_learning_rate +
         0.5 * (cfg.learning_rate - cfg.final_learning_rate) * (1.0 + std::cos(std::numbers::pi * progress));
}

void run(TrainState& state, std::span<const TrainSample> data, const TrainConfig& cfg, const ObjectiveConfig& objective,
         std::uint64_t seed, const StepCallback& on_step) {
  cfg.validate();
  objective.validate();
  state.params.check();
  if (data.empty()) throw ValidationError("training needs at least one sample");
  const ModelConfig& mc = state.params.config;

  std::vector<std::vector<Vec3>> targets;
  targets.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    targets.push_back(training_target(data[i], mc.group_out, target_seed(seed, i)));
  }
  for (const auto& [name, p] : state.params.tensors) {
    state.adam.m.try_emplace(name, ad::Matrix::Zero(p.rows(), p.cols()));
    state.adam.v.try_emplace(name, ad::Matrix::Zero(p.rows(), p.cols()));
  }

  while (state.adam.step < cfg.steps) {
    const std::uint64_t step = state.adam.step;
    Rng rng(derive_seed(seed, step));
    std::map<std::string, ad::Matrix> grads;
    double loss = 0.0;
    const double weight = 1.0 / static_cast<double>(cfg.batch_groups);
    for (std::size_t b = 0; b < cfg.batch_groups; ++b) {
      const std::size_t si = rng.index(data.size());
      const Augmented aug = cloud::augment(data[si].input, cfg.augment, rng.next());
      std::vector<Vec3> target;
      target.reserve(targets[si].size());
      for (const Vec3& p : targets[si]) target.push_back(aug.motion.apply(p));
      const GroupSplit split = cloud::split_groups(aug.cloud, mc.group_in, rng.next(), mc.group_out);
      const auto& group = split.groups[rng.index(split.groups.size())];
      const PointCloud input = cloud::gather(aug.cloud, group);
      loss += weight * group_step(state.params, input, target, objective, rng.next(), weight, grads);
    }
    if (!std::isfinite(loss) || !all_finite(grads)) {
      throw DivergenceError("non-finite loss or gradient at step " + std::to_string(step));
    }

    double scale = 1.0;
    if (cfg.grad_clip > 0.0) {
      double sq = 0.0;
      for (const auto& [name, g] : grads) sq += g.squaredNorm();
      const double norm = std::sqrt(sq);
      if (norm > cfg.grad_clip) scale = cfg.grad_clip / norm;
    }

    const double lr = learning_rate(cfg, step);
    const double t = static_cast<double>(step + 1);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    std::map<std::string, ad::Matrix> next = state.params.tensors;
    std::map<std::string, ad::Matrix> m = state.adam.m, v = state.adam.v;
    for (auto& [name, p] : next) {
      auto it = grads.find(name);
      if (it == grads.end()) continue;
      const ad::Matrix g = it->second * scale;
      ad::Matrix& mi = m.at(name);
      ad::Matrix& vi = v.at(name);
      mi = cfg.beta1 * mi + (1.0 - cfg.beta1) * g;
      vi = cfg.beta2 * vi + (1.0 - cfg.beta2) * g.cwiseProduct(g);
      const ad::Matrix update = (mi / c1).array() / ((vi / c2).array().sqrt() + cfg.epsilon);
      p -= lr * update;
      if (!p.allFinite()) throw DivergenceError("non-finite parameter " + name + " at step " + std::to_string(step));
    }
    state.params.tensors = std::move(next);
    state.adam.m = std::move(m);
    state.adam.v = std::move(v);
    state.adam.step = step + 1;
    state.loss_history.push_back(loss);
    if (on_step) on_step(state, loss);
  }
}

double evaluate_objective(const ModelParams& params, std::span<const TrainSample> data,
                          const ObjectiveConfig& objective, std::uint64_t seed) {
  if (data.empty()) throw ValidationError("evaluation needs at least one sample");
  const ModelConfig& mc = params.config;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::uint64_t s = derive_seed(derive_seed(seed, kEvalStream), i);
    const GroupSplit split = cloud::split_groups(data[i].input, mc.group_in, s, mc.group_out);
    const PointCloud group = cloud::gather(data[i].input, split.groups.front());
    const PointCloud out = model::forward(group, params, derive_seed(s, 1));
    const auto target = training_target(data[i], mc.group_out, target_seed(seed, i));
    total += objective::evaluate(out.points(), target, objective, false).value;
  }
  return total / static_cast<double>(data.size());
}

}  // namespace train

namespace checkpoint {
namespace {

constexpr char kMagic[8] = {'S', 'F', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  void bytes(std::string_view s) { buf_.append(s); }
  void u8(std::uint8_t x) { buf_.push_back(static_cast<char>(x)); }
  void u32(std::uint32_t x) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void u64(std::uint64_t x) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void f32(double x) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(x))); }
  void f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  void tensor(const std::string& name, const ad::Matrix& m) {
    str(name);
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) f32(m(r, c));
  }
  const std::string& data() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string data, std::filesystem::path path) : buf_(std::move(data)), path_(std::move(path)) {}

  std::string_view bytes(std::size_t n) {
    if (buf_.size() - pos_ < n) throw IoError("truncated checkpoint: " + path_.string());
    std::string_view out(buf_.data() + pos_, n);
    pos_ += n;
    return out;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
  std::uint32_t u32() {
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return x;
  }
  std::uint64_t u64() {
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return x;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    return std::string(bytes(n));
  }
  std::pair<std::string, ad::Matrix> tensor() {
    std::string name = str();
    const std::uint32_t rows = u32(), cols = u32();
    if (static_cast<std::uint64_t>(rows) * cols * 4 > buf_.size() - pos_) {
      throw IoError("truncated checkpoint: " + path_.string());
    }
    ad::Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f32();
    return {std::move(name), std::move(m)};
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  std::string buf_;
  std::size_t pos_ = 0;
  std::filesystem::path path_;
};

void write(const ModelParams& params, const AdamState* adam, const std::vector<double>* history,
           const std::filesystem::path& path) {
  params.check();
  Writer w;
  w.bytes(std::string_view(kMagic, sizeof kMagic));
  w.u32(kFormatVersion);
  w.str(config::model_to_toml(params.config, params.version));
  w.u32(static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& [name, m] : params.tensors) w.tensor(name, m);
  w.u8(adam ? 1 : 0);
  if (adam) {
    w.u64(adam->step);
    for (const auto* moments : {&adam->m, &adam->v}) {
      for (const auto& [name, p] : params.tensors) {
        auto it = moments->find(name);
        w.tensor(name, it != moments->end() ? it->second : ad::Matrix::Zero(p.rows(), p.cols()));
      }
    }
    w.u32(static_cast<std::uint32_t>(history->size()));
    for (double x : *history) w.f64(x);
  }
  io::write_file_atomic(path, w.data());
}

}  // namespace

void save(const TrainState& state, const std::filesystem::path& path) {
  write(state.params, &state.adam, &state.loss_history, path);
}

void save(const ModelParams& params, const std::filesystem::path& path) { write(params, nullptr, nullptr, path); }

TrainState load(const std::filesystem::path& path) {
  Reader r(io::read_file(path), path);
  if (r.bytes(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) {
    throw IoError("not a shapefill checkpoint: " + path.string());
  }
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw UnsupportedError("checkpoint format version " + std::to_string(version) + " is not supported");
  }
  TrainState s;
  auto [cfg, tag] = config::model_from_toml(r.str());
  if (tag != ModelParams::kVersion) throw ValidationError("checkpoint model version '" + tag + "' is not supported");
  s.params.config = cfg;
  s.params.version = tag;
  const std::uint32_t count = r.u32();
  std::vector<std::string> order;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, m] = r.tensor();
    order.push_back(name);
    if (!s.params.tensors.emplace(std::move(name), std::move(m)).second) {
      throw IoError("duplicate tensor in checkpoint: " + path.string());
    }
  }
  s.params.check();
  if (r.u8() == 1) {
    s.adam.step = r.u64();
    for (auto* moments : {&s.adam.m, &s.adam.v}) {
      for (const std::string& expected : order) {
        auto [name, m] = r.tensor();
        if (name != expected || m.rows() != s.params.at(name).rows() || m.cols() != s.params.at(name).cols()) {
          throw IoError("optimizer state does not match parameters: " + path.string());
        }
        moments->emplace(std::move(name), std::move(m));
      }
    }
    const std::uint32_t n = r.u32();
    s.loss_history.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) s.loss_history.push_back(r.f64());
  }
  if (!r.done()) throw IoError("trailing bytes in checkpoint: " + path.string());
  return s;
}

ModelParams load_params(const std::filesystem::path& path) { return load(path).params; }

}  // namespace checkpoint
}  // namespace shapefill
