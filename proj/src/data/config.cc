// Copyright 2026 The trajdiff Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "trajdiff/data/config.h"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <type_traits>

#include "trajdiff/errors.h"

namespace trajdiff::data {
namespace {

std::string Trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <typename T>
T Parse(const std::string& key, const std::string& text) {
  const std::string v = Trim(text);
  auto bad = [&]() {
    return ConfigError("invalid value '" + text + "' for " + key);
  };
  if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw bad();
  } else {
    size_t used = 0;
    T out{};
    try {
      if constexpr (std::is_same_v<T, int>) {
        out = std::stoi(v, &used);
      } else if constexpr (std::is_same_v<T, uint64_t>) {
        if (!v.empty() && v[0] == '-') throw bad();
        out = std::stoull(v, &used);
      } else {
        out = std::stod(v, &used);
      }
    } catch (const std::logic_error&) {
      throw bad();
    }
    if (used != v.size()) throw bad();
    return out;
  }
}

template <typename T>
std::string Format(const T& v) {
  if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else {
    return nlohmann::json(v).dump();
  }
}

template <typename T>
ConfigKey Key(std::string name, T RunConfig::*member, std::string help) {
  const std::string key = name;
  return ConfigKey{
      std::move(name), std::move(help),
      [member, key](RunConfig& c, const std::string& v) {
        c.*member = Parse<T>(key, v);
      },
      [member](const RunConfig& c) { return Format(c.*member); }};
}

void Require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

const std::vector<ConfigKey>& ConfigKeys() {
  using C = RunConfig;
  static const std::vector<ConfigKey> keys{
      Key("history_steps", &C::history_steps, "observed steps T_p"),
      Key("future_steps", &C::future_steps, "predicted steps T_f"),
      Key("dt", &C::dt, "seconds between steps"),
      Key("stride", &C::stride, "window stride in annotated frames"),
      Key("swap_xy", &C::swap_xy, "annotation columns are frame id y x"),
      Key("data_root", &C::data_root, "directory with the annotation files"),
      Key("subset", &C::subset, "held-out location for leave-one-out"),
      Key("train_scenes", &C::train_scenes, "training scene file"),
      Key("test_scenes", &C::test_scenes, "evaluation scene file"),
      Key("diffusion_steps", &C::diffusion_steps, "diffusion steps H"),
      Key("beta_start", &C::beta_start, "first noise variance"),
      Key("beta_end", &C::beta_end, "last noise variance"),
      Key("sampler", &C::sampler, "ddim or ddpm"),
      Key("skip", &C::skip, "DDIM step skip"),
      Key("num_samples", &C::num_samples, "sampled candidates M"),
      Key("k", &C::k, "prediction set size K"),
      Key("select", &C::select, "nms, coverage or random"),
      Key("lambda", &C::lambda, "FDE weight in the score targets"),
      Key("omega", &C::omega, "NMS distance threshold (m)"),
      Key("radius", &C::radius, "coverage radius (m)"),
      Key("nms_distance", &C::nms_distance, "endpoint or ade"),
      Key("temperature", &C::temperature, "score target temperature"),
      Key("k_values", &C::k_values, "comma separated K values to report"),
      Key("miss_threshold", &C::miss_threshold, "miss distance (m)"),
      Key("context_width", &C::context_width, "encoder output width"),
      Key("encoder_heads", &C::encoder_heads, "encoder attention heads"),
      Key("encoder_layers", &C::encoder_layers, "temporal encoder layers"),
      Key("encoder_ffn", &C::encoder_ffn, "encoder feed-forward width"),
      Key("lane_features", &C::lane_features, "lane feature size, 0 = none"),
      Key("denoiser_width", &C::denoiser_width, "denoiser width"),
      Key("denoiser_heads", &C::denoiser_heads, "denoiser attention heads"),
      Key("denoiser_layers", &C::denoiser_layers, "denoiser layers"),
      Key("denoiser_ffn", &C::denoiser_ffn, "denoiser feed-forward width"),
      Key("step_embedding", &C::step_embedding, "sinusoidal step features"),
      Key("scorer_heads", &C::scorer_heads, "scorer attention heads"),
      Key("scorer_head_width", &C::scorer_head_width, "scorer head width"),
      Key("scorer_width", &C::scorer_width, "scorer width d"),
      Key("dropout", &C::dropout, "dropout rate"),
      Key("learning_rate", &C::learning_rate, "AdamW learning rate"),
      Key("weight_decay", &C::weight_decay, "AdamW weight decay"),
      Key("batch_size", &C::batch_size, "scenes per batch"),
      Key("denoiser_epochs", &C::denoiser_epochs, "stage one epochs"),
      Key("scorer_epochs", &C::scorer_epochs, "stage two epochs"),
      Key("scorer_samples", &C::scorer_samples, "candidates per scene in stage two"),
      Key("cache_candidates", &C::cache_candidates, "reuse stage two candidates"),
      Key("coordinate_scale", &C::coordinate_scale, "displacement scale factor"),
      Key("seed", &C::seed, "random seed"),
      Key("threads", &C::threads, "worker threads"),
      Key("synth_scenes", &C::synth_scenes, "synthetic scene count"),
      Key("synth_agents", &C::synth_agents, "agents per synthetic scene"),
      Key("synth_modes", &C::synth_modes, "mode:weight list"),
      Key("synth_speed_min", &C::synth_speed_min, "slowest synthetic speed"),
      Key("synth_speed_max", &C::synth_speed_max, "fastest synthetic speed"),
      Key("synth_noise", &C::synth_noise, "synthetic position noise (m)"),
  };
  return keys;
}

void SetConfigValue(RunConfig& config, const std::string& key,
                    const std::string& value) {
  for (const ConfigKey& k : ConfigKeys()) {
    if (k.name == key) {
      k.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void ApplyConfigFile(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (Trim(line).empty()) continue;
    const size_t eq = line.find('=');
    const std::string where = path + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) {
      throw ConfigError(where + "expected key = value");
    }
    try {
      SetConfigValue(config, Trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

std::vector<int> ParseKValues(const std::string& text) {
  std::vector<int> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const int k = Parse<int>("k_values", item);
    if (k < 1) throw ConfigError("k_values entries must be >= 1");
    out.push_back(k);
  }
  if (out.empty()) throw ConfigError("k_values is empty");
  return out;
}

void ValidateConfig(const RunConfig& c) {
  Require(c.history_steps >= 2, "history_steps must be >= 2");
  Require(c.future_steps >= 1, "future_steps must be >= 1");
  Require(c.dt > 0.0, "dt must be positive");
  Require(c.stride >= 1, "stride must be >= 1");
  Require(c.diffusion_steps >= 1, "diffusion_steps must be >= 1");
  Require(c.beta_start > 0.0 && c.beta_start < c.beta_end && c.beta_end < 1.0,
          "beta range must satisfy 0 < beta_start < beta_end < 1");
  Require(c.sampler == "ddim" || c.sampler == "ddpm",
          "sampler must be ddim or ddpm");
  Require(c.skip >= 1, "skip must be >= 1");
  if (c.sampler == "ddim") {
    Require(c.diffusion_steps % c.skip == 0,
            "skip " + std::to_string(c.skip) + " must divide diffusion_steps " +
                std::to_string(c.diffusion_steps));
  }
  Require(c.k >= 1, "k must be >= 1");
  Require(c.num_samples >= c.k, "num_samples (M = " +
                                    std::to_string(c.num_samples) +
                                    ") must be at least k (K = " +
                                    std::to_string(c.k) + ")");
  Require(c.select == "nms" || c.select == "coverage" || c.select == "random",
          "select must be nms, coverage or random");
  Require(c.nms_distance == "endpoint" || c.nms_distance == "ade",
          "nms_distance must be endpoint or ade");
  Require(c.lambda >= 0.0, "lambda must be non-negative");
  Require(c.omega > 0.0 && c.radius > 0.0, "omega and radius must be positive");
  Require(c.temperature > 0.0, "temperature must be positive");
  Require(c.miss_threshold > 0.0, "miss_threshold must be positive");
  const std::vector<int> ks = ParseKValues(c.k_values);
  Require(*std::max_element(ks.begin(), ks.end()) <= c.k,
          "every k_values entry must be <= k");
  Require(c.context_width >= 1 && c.encoder_heads >= 1 &&
              c.context_width % c.encoder_heads == 0,
          "context_width must be a positive multiple of encoder_heads");
  Require(c.encoder_layers >= 0 && c.encoder_ffn >= 1 && c.lane_features >= 0,
          "encoder sizes must be non-negative");
  Require(c.denoiser_width >= 1 && c.denoiser_heads >= 1 &&
              c.denoiser_width % c.denoiser_heads == 0,
          "denoiser_width must be a positive multiple of denoiser_heads");
  Require(c.denoiser_layers >= 1 && c.denoiser_ffn >= 1,
          "denoiser needs at least one layer");
  Require(c.step_embedding >= 2 && c.step_embedding % 2 == 0,
          "step_embedding must be a positive even number");
  Require(c.scorer_heads >= 1 && c.scorer_head_width >= 1 &&
              c.scorer_width >= 1,
          "scorer sizes must be positive");
  Require(c.dropout >= 0.0 && c.dropout < 1.0, "dropout must lie in [0, 1)");
  Require(c.learning_rate > 0.0 && c.weight_decay >= 0.0,
          "learning_rate must be positive and weight_decay non-negative");
  Require(c.batch_size >= 1, "batch_size must be >= 1");
  Require(c.denoiser_epochs >= 0 && c.scorer_epochs >= 0,
          "epoch counts must be non-negative");
  Require(c.scorer_samples >= 1, "scorer_samples must be >= 1");
  Require(c.coordinate_scale > 0.0, "coordinate_scale must be positive");
  Require(c.threads >= 1, "threads must be >= 1");
  Require(c.synth_scenes >= 0 && c.synth_agents >= 1,
          "synthetic sizes must be positive");
}

std::string ConfigToText(const RunConfig& config) {
  std::ostringstream os;
  for (const ConfigKey& k : ConfigKeys()) {
    os << k.name << " = " << k.get(config) << "\n";
  }
  return os.str();
}

nlohmann::json ConfigToJson(const RunConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const ConfigKey& k : ConfigKeys()) j[k.name] = k.get(config);
  return j;
}

}  // namespace trajdiff::data
