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

// Run configuration.
//
// Config files hold one "key = value" pair per line; '#' starts a comment.
// Every key can also be set on the command line as --key value (with
// underscores written as dashes). Later assignments win.

#ifndef TRAJDIFF_DATA_CONFIG_H_
#define TRAJDIFF_DATA_CONFIG_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace trajdiff::data {

struct RunConfig {
  // Horizon and data.
  int history_steps = 8;
  int future_steps = 12;
  double dt = 0.4;
  int stride = 1;
  bool swap_xy = false;
  std::string data_root;
  std::string subset;
  std::string train_scenes;
  std::string test_scenes;

  // Diffusion.
  int diffusion_steps = 200;
  double beta_start = 1e-4;
  double beta_end = 0.05;
  std::string sampler = "ddim";
  int skip = 20;
  int num_samples = 100;

  // Selection.
  int k = 20;
  std::string select = "nms";
  double lambda = 1.5;
  double omega = 8.0;
  double radius = 2.0;
  std::string nms_distance = "endpoint";
  double temperature = 1.0;
  std::string k_values = "1,5,10,20";
  double miss_threshold = 2.0;

  // Architecture.
  int context_width = 128;
  int encoder_heads = 4;
  int encoder_layers = 2;
  int encoder_ffn = 256;
  int lane_features = 0;
  int denoiser_width = 128;
  int denoiser_heads = 4;
  int denoiser_layers = 5;
  int denoiser_ffn = 256;
  int step_embedding = 64;
  int scorer_heads = 4;
  int scorer_head_width = 32;
  int scorer_width = 128;
  double dropout = 0.1;

  // Optimization.
  double learning_rate = 5e-4;
  double weight_decay = 0.01;
  int batch_size = 32;
  int denoiser_epochs = 80;
  int scorer_epochs = 20;
  // Candidates per scene while training the scorer.
  int scorer_samples = 100;
  // Reuse each scene's sampled candidates across scorer epochs.
  bool cache_candidates = true;
  // Multiplies invariant displacements before they reach the networks.
  double coordinate_scale = 1.0;
  uint64_t seed = 0;
  int threads = 1;

  // Synthetic generator.
  int synth_scenes = 1000;
  int synth_agents = 3;
  std::string synth_modes = "straight:0.25,left:0.25,right:0.25,stop:0.25";
  double synth_speed_min = 0.8;
  double synth_speed_max = 1.6;
  double synth_noise = 0.0;
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<ConfigKey>& ConfigKeys();

// Throws ConfigError on an unknown key or unparsable value.
void SetConfigValue(RunConfig& config, const std::string& key,
                    const std::string& value);

// Applies a key = value file. Throws ConfigError with the line number.
void ApplyConfigFile(RunConfig& config, const std::string& path);

// Cross-field checks: H mod skip for DDIM, M >= K, widths divisible by
// heads, positive sizes, known enum names.
void ValidateConfig(const RunConfig& config);

// Parses the k_values list.
std::vector<int> ParseKValues(const std::string& text);

// key = value text covering every key, loadable by ApplyConfigFile.
std::string ConfigToText(const RunConfig& config);
nlohmann::json ConfigToJson(const RunConfig& config);

}  // namespace trajdiff::data

#endif  // TRAJDIFF_DATA_CONFIG_H_
