/*
 * Copyright 2026 The greedlab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Experiment configuration file.
//
// Grammar (one item per line):
//   # comment            full-line comment ('#' or ';')
//   [section]            opens a section
//   key = value          key inside the current section
//   section.key = value  fully qualified key, valid anywhere
// Blank lines are ignored. A '#' preceded by whitespace starts a trailing
// comment. Unknown sections or keys, duplicate keys and malformed values are
// rejected with the offending line number. serialize_config() emits every key
// in a fixed canonical order.

#include <charconv>
#include <cstdint>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "greedlab/errors.hpp"
#include "greedlab/trainer.hpp"

namespace greedlab {

struct ExperimentConfig {
  TrainConfig train;
  std::size_t grid_side = 5;
  double grid_spacing = 2.0;
  std::vector<std::uint64_t> seeds{1};
  std::string out_dir = "runs";

  /// TrainConfig for one seed, with the data spec rebuilt from the grid keys.
  TrainConfig for_seed(std::uint64_t seed) const {
    TrainConfig c = train;
    c.seed = seed;
    c.data = GaussianGridSpec::grid(grid_side, grid_spacing, train.data.sigma);
    return c;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline double parse_real(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw std::invalid_argument("expected a real number, got '" + std::string(s) + "'");
  }
  return v;
}

inline std::uint64_t parse_count(std::string_view s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

inline bool parse_bool(std::string_view s) {
  if (s == "true" || s == "on" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "off" || s == "no" || s == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + std::string(s) + "'");
}

inline std::vector<std::uint64_t> parse_seeds(std::string_view s) {
  std::vector<std::uint64_t> seeds;
  std::string item;
  std::istringstream in{std::string(s)};
  while (std::getline(in, item, ',')) {
    const std::string t = trim(item);
    const auto dots = t.find("..");
    if (dots != std::string::npos) {
      const auto lo = parse_count(t.substr(0, dots));
      const auto hi = parse_count(t.substr(dots + 2));
      if (hi < lo || hi - lo > 100000) throw std::invalid_argument("bad seed range '" + t + "'");
      for (auto k = lo; k <= hi; ++k) seeds.push_back(k);
    } else {
      seeds.push_back(parse_count(t));
    }
  }
  if (seeds.empty()) throw std::invalid_argument("seed list is empty");
  return seeds;
}

struct ConfigField {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

#define GREEDLAB_COUNT(key, path)                                                            \
  ConfigField {                                                                              \
    key, [](const ExperimentConfig& c) { return std::to_string(c.path); },                   \
        [](ExperimentConfig& c, std::string_view v) {                                        \
          c.path = static_cast<std::decay_t<decltype(c.path)>>(parse_count(v));              \
        }                                                                                    \
  }
#define GREEDLAB_REAL(key, path)                                                             \
  ConfigField {                                                                              \
    key, [](const ExperimentConfig& c) { return shortest(c.path); },                         \
        [](ExperimentConfig& c, std::string_view v) { c.path = parse_real(v); }              \
  }

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = {
      {"train.variant",
       [](const ExperimentConfig& c) { return std::string(c.train.variant == Variant::kGan ? "gan" : "wgan"); },
       [](ExperimentConfig& c, std::string_view v) {
         if (v == "gan") c.train.variant = Variant::kGan;
         else if (v == "wgan") c.train.variant = Variant::kWgan;
         else throw std::invalid_argument("expected gan or wgan, got '" + std::string(v) + "'");
       }},
      GREEDLAB_COUNT("train.batch_size", train.batch_size),
      GREEDLAB_COUNT("train.total_iterations", train.total_iterations),
      GREEDLAB_COUNT("train.d_steps_per_g_step", train.d_steps_per_g_step),
      GREEDLAB_REAL("train.clip_c", train.clip_c),
      GREEDLAB_COUNT("train.snapshot_every", train.snapshot_every),
      GREEDLAB_COUNT("train.hidden_width", train.hidden_width),
      GREEDLAB_COUNT("train.hidden_layers", train.hidden_layers),
      GREEDLAB_REAL("adam.lr", train.adam.lr),
      GREEDLAB_REAL("adam.beta1", train.adam.beta1),
      GREEDLAB_REAL("adam.beta2", train.adam.beta2),
      GREEDLAB_REAL("adam.eps", train.adam.eps),
      {"relaxation.enabled",
       [](const ExperimentConfig& c) { return std::string(c.train.relaxation.enabled ? "true" : "false"); },
       [](ExperimentConfig& c, std::string_view v) { c.train.relaxation.enabled = parse_bool(v); }},
      GREEDLAB_REAL("relaxation.lambda0", train.relaxation.lambda0),
      GREEDLAB_REAL("relaxation.decay_factor", train.relaxation.decay_factor),
      GREEDLAB_COUNT("relaxation.decay_every", train.relaxation.decay_every),
      GREEDLAB_REAL("relaxation.t_min", train.relaxation.t_min),
      GREEDLAB_REAL("relaxation.t_max", train.relaxation.t_max),
      GREEDLAB_COUNT("data.grid_side", grid_side),
      GREEDLAB_REAL("data.spacing", grid_spacing),
      GREEDLAB_REAL("data.sigma", train.data.sigma),
      GREEDLAB_COUNT("latent.dim", train.latent.dim),
      GREEDLAB_COUNT("eval.samples", train.eval.samples),
      GREEDLAB_REAL("eval.radius_sigmas", train.eval.coverage.radius_sigmas),
      GREEDLAB_REAL("eval.coverage_min", train.eval.coverage.coverage_min),
      GREEDLAB_COUNT("eval.critic_every", train.eval.critic_every),
      GREEDLAB_COUNT("eval.critic_iterations", train.eval.critic_iterations),
      GREEDLAB_COUNT("eval.critic_eval_samples", train.eval.critic_eval_samples),
      GREEDLAB_COUNT("eval.plot_resolution", train.eval.plot_resolution),
      {"experiment.seeds",
       [](const ExperimentConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(c.seeds[i]);
         return s;
       },
       [](ExperimentConfig& c, std::string_view v) { c.seeds = parse_seeds(v); }},
      {"experiment.out_dir", [](const ExperimentConfig& c) { return c.out_dir; },
       [](ExperimentConfig& c, std::string_view v) {
         if (v.empty()) throw std::invalid_argument("out_dir must not be empty");
         c.out_dir = std::string(v);
       }},
  };
  return fields;
}

#undef GREEDLAB_COUNT
#undef GREEDLAB_REAL

inline const ConfigField* find_field(std::string_view key) {
  for (const auto& f : config_fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

}  // namespace detail

/// Checks cross-field invariants; throws ContractError.
inline void validate_config(const ExperimentConfig& config) {
  require(config.grid_side > 0, "data.grid_side must be positive");
  require(config.grid_spacing > 0.0, "data.spacing must be positive");
  require(!config.seeds.empty(), "experiment.seeds must not be empty");
  config.for_seed(config.seeds.front()).validate();
}

inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::set<std::string> seen;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    for (std::size_t i = 1; i < line.size(); ++i) {
      if (line[i] == '#' && (line[i - 1] == ' ' || line[i - 1] == '\t')) {
        line = detail::trim(line.substr(0, i));
        break;
      }
    }
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const auto& f : detail::config_fields()) {
        known = known || std::string_view(f.key).starts_with(section + ".");
      }
      if (!known) throw ConfigError(line_no, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "expected 'key = value'");
    std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(line_no, "missing key");
    if (key.find('.') == std::string::npos) {
      if (section.empty()) throw ConfigError(line_no, "key '" + key + "' outside of any section");
      key = section + "." + key;
    }
    const auto* field = detail::find_field(key);
    if (field == nullptr) throw ConfigError(line_no, "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(line_no, "duplicate key '" + key + "'");
    try {
      field->set(config, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(line_no, key + ": " + e.what());
    }
  }
  config.train.data = GaussianGridSpec::grid(config.grid_side, config.grid_spacing, config.train.data.sigma);
  try {
    validate_config(config);
  } catch (const ContractError& e) {
    throw ConfigError(0, e.what());
  }
  return config;
}

inline std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  std::string section;
  for (const auto& f : detail::config_fields()) {
    const std::string_view key(f.key);
    const auto dot = key.find('.');
    const std::string sec(key.substr(0, dot));
    if (sec != section) {
      if (!section.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += std::string(key.substr(dot + 1)) + " = " + f.get(config) + "\n";
  }
  return out;
}

inline ExperimentConfig load_config(const std::string& path) { return parse_config(read_text_file(path)); }

}  // namespace greedlab
