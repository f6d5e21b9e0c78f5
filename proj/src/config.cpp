// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapefill/config.hpp"

#include <charconv>
#include <climits>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include <toml.hpp>

#include "io_util.hpp"

namespace shapefill {

void RunConfig::validate() const {
  model.validate();
  objective.validate();
  train.validate();
  pipeline_config().validate();
  phantom.validate();
  if (jobs == 0) throw ValidationError("jobs must be >= 1");
  if (phantom_count == 0) throw ValidationError("phantom.count must be >= 1");
}

PipelineConfig RunConfig::pipeline_config() const {
  PipelineConfig p = pipeline;
  p.seed = seed;
  return p;
}

namespace config {
namespace {

using Setter = std::function<void(const toml::node&)>;
using Getter = std::function<std::string()>;

struct Binding {
  Setter set;
  Getter get;
};

[[noreturn]] void bad_type(const std::string& key, const char* want) {
  throw ValidationError("config key " + key + " must be " + want);
}

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string quote(std::string_view s) {
  std::ostringstream out;
  out << toml::value<std::string>(std::string(s));
  return out.str();
}

class Registry {
 public:
  void size(const std::string& key, std::size_t& field) {
    add(key, [key, f = &field](const toml::node& n) { *f = static_cast<std::size_t>(non_negative(key, n)); },
        [f = &field] { return std::to_string(*f); });
  }
  // TOML integers are signed 64-bit, so larger values travel as decimal strings.
  void u64(const std::string& key, std::uint64_t& field) {
    add(key,
        [key, f = &field](const toml::node& n) {
          if (const auto s = n.value_exact<std::string>()) {
            std::uint64_t v = 0;
            const auto [end, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
            if (ec != std::errc() || end != s->data() + s->size() || s->empty()) {
              bad_type(key, "a non-negative integer");
            }
            *f = v;
            return;
          }
          *f = static_cast<std::uint64_t>(non_negative(key, n));
        },
        [f = &field] {
          const std::string digits = std::to_string(*f);
          return *f > static_cast<std::uint64_t>(INT64_MAX) ? "\"" + digits + "\"" : digits;
        });
  }
  void integer(const std::string& key, int& field) {
    add(key,
        [key, f = &field](const toml::node& n) {
          const auto v = n.value_exact<std::int64_t>();
          if (!v || *v < INT32_MIN || *v > INT32_MAX) bad_type(key, "an integer");
          *f = static_cast<int>(*v);
        },
        [f = &field] { return std::to_string(*f); });
  }
  void real(const std::string& key, double& field) {
    add(key,
        [key, f = &field](const toml::node& n) {
          if (!n.is_number()) bad_type(key, "a number");
          *f = *n.value<double>();
        },
        [f = &field] { return format_real(*f); });
  }
  void flag(const std::string& key, bool& field) {
    add(key,
        [key, f = &field](const toml::node& n) {
          if (!n.is_boolean()) bad_type(key, "true or false");
          *f = *n.value<bool>();
        },
        [f = &field] { return *f ? std::string("true") : std::string("false"); });
  }
  void choice(const std::string& key, std::function<void(const std::string&)> parse, std::function<std::string()> name) {
    add(key,
        [key, parse](const toml::node& n) {
          if (!n.is_string()) bad_type(key, "a string");
          parse(*n.value<std::string>());
        },
        [name] { return quote(name()); });
  }

  void custom(const std::string& key, Setter set, Getter get) { add(key, std::move(set), std::move(get)); }

  const std::map<std::string, Binding>& entries() const { return entries_; }
  const std::vector<std::string>& order() const { return order_; }

  void set(const std::string& key, const toml::node& value) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ValidationError("unknown config key: " + key);
    it->second.set(value);
  }

 private:
  static std::int64_t non_negative(const std::string& key, const toml::node& n) {
    const auto v = n.value_exact<std::int64_t>();
    if (!v || *v < 0) bad_type(key, "a non-negative integer");
    return *v;
  }
  void add(const std::string& key, Setter set, Getter get) {
    entries_.emplace(key, Binding{std::move(set), std::move(get)});
    order_.push_back(key);
  }

  std::map<std::string, Binding> entries_;
  std::vector<std::string> order_;
};

void bind_model(Registry& r, ModelConfig& m) {
  r.size("model.group_in", m.group_in);
  r.size("model.group_out", m.group_out);
  r.size("model.n_proxies", m.n_proxies);
  r.size("model.feat_dim", m.feat_dim);
  r.size("model.n_enc_blocks", m.n_enc_blocks);
  r.size("model.n_dec_blocks", m.n_dec_blocks);
  r.size("model.n_heads", m.n_heads);
  r.size("model.knn_k", m.knn_k);
  r.size("model.n_queries", m.n_queries);
  r.size("model.fold_seed", m.fold_seed);
  r.real("model.fold_radius", m.fold_radius);
}

Registry bind(RunConfig& c) {
  Registry r;
  r.u64("seed", c.seed);
  r.size("jobs", c.jobs);
  bind_model(r, c.model);

  ObjectiveConfig& o = c.objective;
  r.choice("objective.kind", [o = &o](const std::string& s) { o->kind = objective::parse_kind(s); },
           [o = &o] { return objective::to_string(o->kind); });
  r.real("objective.alpha", o.alpha);
  r.integer("objective.k", o.k);
  r.real("objective.temperature", o.temperature);

  TrainConfig& t = c.train;
  r.u64("train.steps", t.steps);
  r.real("train.learning_rate", t.learning_rate);
  r.real("train.final_learning_rate", t.final_learning_rate);
  r.u64("train.warmup_steps", t.warmup_steps);
  r.real("train.beta1", t.beta1);
  r.real("train.beta2", t.beta2);
  r.real("train.epsilon", t.epsilon);
  r.real("train.grad_clip", t.grad_clip);
  r.size("train.batch_groups", t.batch_groups);
  r.u64("train.checkpoint_every", c.checkpoint_every);
  r.real("train.augment.max_crop_fraction", t.augment.max_crop_fraction);
  r.real("train.augment.max_angle", t.augment.max_angle);
  r.real("train.augment.max_shift", t.augment.max_shift);

  PipelineConfig& p = c.pipeline;
  r.size("pipeline.refinements", p.refinements);
  r.real("pipeline.jitter_sigma", p.jitter_sigma);
  r.size("pipeline.group_in", p.group_in);
  r.size("pipeline.group_out", p.group_out);
  r.choice(
      "pipeline.closing_kind",
      [p = &p](const std::string& s) {
        if (s == "cube26") {
          p->closing.kind = StructuringElement::Kind::cube26;
        } else if (s == "cross6") {
          p->closing.kind = StructuringElement::Kind::cross6;
        } else {
          throw ValidationError("pipeline.closing_kind must be \"cube26\" or \"cross6\"");
        }
      },
      [p = &p] { return std::string(p->closing.kind == StructuringElement::Kind::cube26 ? "cube26" : "cross6"); });
  r.integer("pipeline.closing_radius", p.closing.radius);
  r.custom(
      "pipeline.connectivity",
      [p = &p](const toml::node& n) {
        const auto v = n.value_exact<std::int64_t>();
        if (!v || (*v != 6 && *v != 26)) bad_type("pipeline.connectivity", "6 or 26");
        p->connectivity = *v == 6 ? Connectivity::six : Connectivity::twenty_six;
      },
      [p = &p] { return std::to_string(static_cast<int>(p->connectivity)); });
  r.flag("pipeline.mesh", p.mesh);

  PhantomSpec& ph = c.phantom;
  r.choice(
      "phantom.kind",
      [ph = &ph](const std::string& s) {
        if (s == "sphere_shell") {
          ph->kind = PhantomSpec::Kind::sphere_shell;
        } else if (s == "ellipsoid_shell") {
          ph->kind = PhantomSpec::Kind::ellipsoid_shell;
        } else {
          throw ValidationError("phantom.kind must be \"sphere_shell\" or \"ellipsoid_shell\"");
        }
      },
      [ph = &ph] { return std::string(ph->kind == PhantomSpec::Kind::sphere_shell ? "sphere_shell" : "ellipsoid_shell"); });
  r.integer("phantom.grid", ph.grid);
  r.real("phantom.radius", ph.radius);
  r.integer("phantom.thickness", ph.thickness);
  r.real("phantom.defect_fraction", ph.defect_fraction);
  r.size("phantom.count", c.phantom_count);
  return r;
}

void apply_table(const Registry& r, const toml::table& table, const std::string& prefix) {
  for (auto&& [k, v] : table) {
    const std::string key = prefix + std::string(k.str());
    if (const toml::table* sub = v.as_table()) {
      apply_table(r, *sub, key + ".");
    } else {
      r.set(key, v);
    }
  }
}

toml::table parse(std::string_view text, std::string_view what) {
  try {
    return toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << what << ": " << e.description() << " at line " << e.source().begin.line;
    throw ValidationError(msg.str());
  }
}

// TOML text of the given keys: top-level keys first, then one table per prefix.
std::string render(const Registry& r) {
  std::ostringstream out;
  std::string current;
  for (const std::string& key : r.order()) {
    const auto dot = key.rfind('.');
    const std::string table = dot == std::string::npos ? "" : key.substr(0, dot);
    const std::string leaf = dot == std::string::npos ? key : key.substr(dot + 1);
    if (table != current) {
      out << "\n[" << table << "]\n";
      current = table;
    }
    out << leaf << " = " << r.entries().at(key).get() << "\n";
  }
  return out.str();
}

}  // namespace

void apply_toml(RunConfig& cfg, std::string_view text) {
  const toml::table table = parse(text, "config");
  RunConfig next = cfg;
  apply_table(bind(next), table, "");
  cfg = next;
}

void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ValidationError("override must look like key=value: " + std::string(assignment));
  const std::string key(io::trim(assignment.substr(0, eq)));
  const std::string value(io::trim(assignment.substr(eq + 1)));
  if (key.empty() || value.empty()) throw ValidationError("override must look like key=value: " + std::string(assignment));
  toml::table table;
  try {
    table = toml::parse("v = " + value);
  } catch (const toml::parse_error&) {
    table = parse("v = " + quote(value), "override " + key);
  }
  RunConfig next = cfg;
  bind(next).set(key, *table.get("v"));
  cfg = next;
}

RunConfig load(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (file) apply_toml(cfg, io::read_file(*file));
  for (const std::string& o : overrides) apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

std::string to_toml(const RunConfig& cfg) {
  RunConfig copy = cfg;
  return render(bind(copy));
}

std::string model_to_toml(const ModelConfig& cfg, std::string_view version) {
  ModelConfig copy = cfg;
  Registry r;
  bind_model(r, copy);
  return "version = " + quote(version) + "\n" + render(r);
}

std::pair<ModelConfig, std::string> model_from_toml(std::string_view text) {
  toml::table table = parse(text, "model config");
  const auto version = table["version"].value<std::string>();
  if (!version) throw ValidationError("model config lacks a version tag");
  table.erase("version");
  ModelConfig cfg;
  Registry r;
  bind_model(r, cfg);
  apply_table(r, table, "");
  cfg.validate();
  return {cfg, *version};
}

}  // namespace config
}  // namespace shapefill
