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

// The three learned components: context encoder, noise-predicting denoiser
// and candidate scorer.

#ifndef TRAJDIFF_NETWORKS_MODELS_H_
#define TRAJDIFF_NETWORKS_MODELS_H_

#include <cstdint>
#include <random>
#include <vector>

#include "json.hpp"
#include "trajdiff/geometry/geometry.h"
#include "trajdiff/networks/layers.h"

namespace trajdiff::networks {

struct EncoderConfig {
  int history_steps = 8;
  int64_t width = 128;  // context width d_c
  int64_t heads = 4;
  int temporal_layers = 2;
  int64_t ffn_width = 256;
  int64_t lane_features = 0;  // 0 disables lane cross-attention
  double dropout = 0.1;
};

struct DenoiserConfig {
  int future_steps = 12;
  int64_t width = 128;
  int64_t heads = 4;
  int layers = 5;
  int64_t ffn_width = 256;
  int64_t context_width = 128;
  int64_t step_embedding = 64;
  double dropout = 0.1;
};

struct ScorerConfig {
  int future_steps = 12;
  int64_t context_width = 128;
  int64_t heads = 4;
  int64_t head_width = 32;  // d_k
  int64_t width = 128;      // d
  double dropout = 0.1;
};

nlohmann::json ToJson(const EncoderConfig& c);
nlohmann::json ToJson(const DenoiserConfig& c);
nlohmann::json ToJson(const ScorerConfig& c);

using LaneFeatures = std::vector<std::vector<double>>;

struct EncoderInput {
  // Invariant displacement histories, one per agent, each history_steps long.
  std::vector<geometry::Trajectory> histories;
  // Scene index of each agent (0-based, contiguous). Empty means one scene.
  // Agents only attend to agents of the same scene.
  std::vector<int> scene;
  // Optional lane feature vectors per scene index.
  std::vector<LaneFeatures> lanes;
};

class Encoder {
 public:
  explicit Encoder(EncoderConfig config);

  const EncoderConfig& config() const { return config_; }
  void Register(ParameterStore& store, std::mt19937_64& rng) const;
  // Returns [N, width]. Throws ShapeError on N = 0 or malformed input.
  Var Encode(const ForwardContext& ctx, const EncoderInput& input) const;

 private:
  EncoderConfig config_;
};

class Denoiser {
 public:
  explicit Denoiser(DenoiserConfig config);

  const DenoiserConfig& config() const { return config_; }
  void Register(ParameterStore& store, std::mt19937_64& rng) const;
  // noisy: [B, T_f, 2], steps: B diffusion indices, context: [B, d_c].
  // Returns the predicted noise, [B, T_f, 2].
  Var Predict(const ForwardContext& ctx, const Var& noisy,
              const std::vector<int>& steps, const Var& context) const;

 private:
  DenoiserConfig config_;
};

class Scorer {
 public:
  explicit Scorer(ScorerConfig config);

  const ScorerConfig& config() const { return config_; }
  void Register(ParameterStore& store, std::mt19937_64& rng) const;
  // candidates: [B, M, T_f, 2] agent-frame positions relative to the last
  // observed point; context: [B, d_c]. Returns raw scores [B, M].
  Var Score(const ForwardContext& ctx, const Var& candidates,
            const Var& context) const;

 private:
  ScorerConfig config_;
};

}  // namespace trajdiff::networks

#endif  // TRAJDIFF_NETWORKS_MODELS_H_
