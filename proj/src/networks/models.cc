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

#include "trajdiff/networks/models.h"

#include <string>

#include "trajdiff/errors.h"
#include "trajdiff/tensor/ops.h"

namespace trajdiff::networks {
namespace {

namespace t = tensor;

void CheckPositive(int64_t v, const char* what) {
  if (v < 1) throw ConfigError(std::string(what) + " must be positive");
}

void CheckRate(double rate) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout rate must lie in [0, 1)");
  }
}

std::string Layer(const std::string& prefix, int i) {
  return prefix + "." + std::to_string(i);
}

}  // namespace

nlohmann::json ToJson(const EncoderConfig& c) {
  return {{"history_steps", c.history_steps}, {"width", c.width},
          {"heads", c.heads},                 {"temporal_layers", c.temporal_layers},
          {"ffn_width", c.ffn_width},         {"lane_features", c.lane_features},
          {"dropout", c.dropout}};
}

nlohmann::json ToJson(const DenoiserConfig& c) {
  return {{"future_steps", c.future_steps}, {"width", c.width},
          {"heads", c.heads},               {"layers", c.layers},
          {"ffn_width", c.ffn_width},       {"context_width", c.context_width},
          {"step_embedding", c.step_embedding}, {"dropout", c.dropout}};
}

nlohmann::json ToJson(const ScorerConfig& c) {
  return {{"future_steps", c.future_steps}, {"context_width", c.context_width},
          {"heads", c.heads},               {"head_width", c.head_width},
          {"width", c.width},               {"dropout", c.dropout}};
}

// Encoder ------------------------------------------------------------------

Encoder::Encoder(EncoderConfig config) : config_(config) {
  if (config_.history_steps < 2) {
    throw ConfigError("history_steps must be at least 2");
  }
  CheckPositive(config_.width, "encoder width");
  CheckPositive(config_.heads, "encoder heads");
  CheckPositive(config_.ffn_width, "encoder ffn width");
  if (config_.temporal_layers < 0 || config_.lane_features < 0) {
    throw ConfigError("encoder layer and lane counts must be non-negative");
  }
  CheckRate(config_.dropout);
}

void Encoder::Register(ParameterStore& store, std::mt19937_64& rng) const {
  const EncoderConfig& c = config_;
  Linear{"encoder.embed", 2, c.width}.Register(store, rng);
  store.AddUniform("encoder.position", {c.history_steps, c.width}, c.width,
                   rng);
  for (int i = 0; i < c.temporal_layers; ++i) {
    TransformerLayer{Layer("encoder.temporal", i), c.width, c.heads,
                     c.ffn_width, c.dropout}
        .Register(store, rng);
  }
  Norm{"encoder.temporal_norm", c.width}.Register(store);
  TransformerLayer{"encoder.social", c.width, c.heads, c.ffn_width, c.dropout}
      .Register(store, rng);
  if (c.lane_features > 0) {
    Linear{"encoder.lane_embed", c.lane_features + 1, c.width}.Register(store,
                                                                      rng);
    Norm{"encoder.lane_norm", c.width}.Register(store);
    Attention{"encoder.lane_attention", c.width, c.width, c.heads,
              c.width / c.heads, c.width, true}
        .Register(store, rng);
  }
  Norm{"encoder.output_norm", c.width}.Register(store);
}

Var Encoder::Encode(const ForwardContext& ctx, const EncoderInput& input) const {
  const EncoderConfig& c = config_;
  const int64_t n = static_cast<int64_t>(input.histories.size());
  if (n == 0) throw ShapeError("encoder needs at least one agent");
  if (!input.scene.empty() && static_cast<int64_t>(input.scene.size()) != n) {
    throw ShapeError("scene index list has " +
                     std::to_string(input.scene.size()) + " entries for " +
                     std::to_string(n) + " agents");
  }
  auto scene_of = [&](int64_t i) { return input.scene.empty() ? 0 : input.scene[i]; };
  int num_scenes = 0;
  for (int64_t i = 0; i < n; ++i) {
    if (scene_of(i) < 0) throw ShapeError("negative scene index");
    num_scenes = std::max(num_scenes, scene_of(i) + 1);
  }

  Array histories({n, c.history_steps, 2});
  for (int64_t i = 0; i < n; ++i) {
    const geometry::Trajectory& h = input.histories[i];
    if (static_cast<int>(h.size()) != c.history_steps) {
      throw ShapeError("agent history has " + std::to_string(h.size()) +
                       " steps, expected " + std::to_string(c.history_steps));
    }
    for (int k = 0; k < c.history_steps; ++k) {
      histories[(i * c.history_steps + k) * 2] = h[k].x();
      histories[(i * c.history_steps + k) * 2 + 1] = h[k].y();
    }
  }

  // Per-agent temporal encoding.
  Var x = Linear{"encoder.embed", 2, c.width}.Apply(
      ctx, ctx.tape.Constant(std::move(histories)));
  x = t::Add(x, ctx.Param("encoder.position"));
  for (int i = 0; i < c.temporal_layers; ++i) {
    x = TransformerLayer{Layer("encoder.temporal", i), c.width, c.heads,
                         c.ffn_width, c.dropout}
            .Apply(ctx, x);
  }
  x = t::MeanTokens(Norm{"encoder.temporal_norm", c.width}.Apply(ctx, x));

  // Agent-agent attention within each scene.
  Array social_mask({n, n});
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      if (scene_of(i) != scene_of(j)) social_mask[i * n + j] = kMaskedLogit;
    }
  }
  x = t::Reshape(x, {1, n, c.width});
  x = TransformerLayer{"encoder.social", c.width, c.heads, c.ffn_width,
                       c.dropout}
          .Apply(ctx, x, &social_mask);

  if (c.lane_features > 0) {
    // Each scene contributes its lanes plus one "no lane" token flagged by
    // an extra feature, so every agent has at least one key to attend to.
    std::vector<double> rows;
    std::vector<int> key_scene;
    const int64_t f = c.lane_features;
    for (int s = 0; s < num_scenes; ++s) {
      if (s < static_cast<int>(input.lanes.size())) {
        for (const std::vector<double>& lane : input.lanes[s]) {
          if (static_cast<int64_t>(lane.size()) != f) {
            throw ShapeError("lane feature vector has " +
                             std::to_string(lane.size()) + " entries, expected " +
                             std::to_string(f));
          }
          rows.insert(rows.end(), lane.begin(), lane.end());
          rows.push_back(0.0);
          key_scene.push_back(s);
        }
      }
      rows.insert(rows.end(), f, 0.0);
      rows.push_back(1.0);
      key_scene.push_back(s);
    }
    const int64_t keys = static_cast<int64_t>(key_scene.size());
    Array lane_mask({n, keys});
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t k = 0; k < keys; ++k) {
        if (scene_of(i) != key_scene[k]) lane_mask[i * keys + k] = kMaskedLogit;
      }
    }
    const Var lane_tokens = t::Reshape(
        Linear{"encoder.lane_embed", f + 1, c.width}.Apply(
            ctx, ctx.tape.Constant(Array({keys, f + 1}, std::move(rows)))),
        {1, keys, c.width});
    const Var q = Norm{"encoder.lane_norm", c.width}.Apply(ctx, x);
    const Var attended =
        Attention{"encoder.lane_attention", c.width, c.width, c.heads,
                  c.width / c.heads, c.width, true}
            .Apply(ctx, q, lane_tokens, &lane_mask);
    x = t::Add(x, ctx.Dropout(attended, c.dropout));
  }

  x = Norm{"encoder.output_norm", c.width}.Apply(ctx, x);
  return t::Reshape(x, {n, c.width});
}

// Denoiser -----------------------------------------------------------------

Denoiser::Denoiser(DenoiserConfig config) : config_(config) {
  CheckPositive(config_.future_steps, "future_steps");
  CheckPositive(config_.width, "denoiser width");
  CheckPositive(config_.heads, "denoiser heads");
  CheckPositive(config_.layers, "denoiser layers");
  CheckPositive(config_.ffn_width, "denoiser ffn width");
  CheckPositive(config_.context_width, "context width");
  if (config_.step_embedding < 2 || config_.step_embedding % 2 != 0) {
    throw ConfigError("step embedding width must be a positive even number");
  }
  CheckRate(config_.dropout);
}

void Denoiser::Register(ParameterStore& store, std::mt19937_64& rng) const {
  const DenoiserConfig& c = config_;
  // The token input is [y_j, C, e(eta)] concatenated; its projection is
  // stored as three blocks so C and e(eta) are projected once per sample.
  const int64_t fan_in = 2 + c.context_width + c.width;
  store.AddUniform("denoiser.input.y", {2, c.width}, fan_in, rng);
  store.AddUniform("denoiser.input.context", {c.context_width, c.width},
                   fan_in, rng);
  store.AddUniform("denoiser.input.step", {c.width, c.width}, fan_in, rng);
  store.Add("denoiser.input.bias", Array({c.width}));
  Linear{"denoiser.step", c.step_embedding, c.width}.Register(store, rng);
  store.AddUniform("denoiser.position", {c.future_steps, c.width}, c.width,
                   rng);
  for (int i = 0; i < c.layers; ++i) {
    TransformerLayer{Layer("denoiser.layer", i), c.width, c.heads,
                     c.ffn_width, c.dropout}
        .Register(store, rng);
  }
  Norm{"denoiser.output_norm", c.width}.Register(store);
  Linear{"denoiser.output", c.width, 2}.Register(store, rng);
}

Var Denoiser::Predict(const ForwardContext& ctx, const Var& noisy,
                      const std::vector<int>& steps,
                      const Var& context) const {
  const DenoiserConfig& c = config_;
  const t::Shape& ys = noisy.shape();
  if (ys.size() != 3 || ys[1] != c.future_steps || ys[2] != 2) {
    throw ShapeError("denoiser input must be [B, " +
                     std::to_string(c.future_steps) + ", 2], got " +
                     t::ShapeToString(ys));
  }
  const int64_t b = ys[0];
  if (static_cast<int64_t>(steps.size()) != b) {
    throw ShapeError("got " + std::to_string(steps.size()) +
                     " diffusion steps for a batch of " + std::to_string(b));
  }
  if (context.shape() != t::Shape{b, c.context_width}) {
    throw ShapeError("context must be [" + std::to_string(b) + ", " +
                     std::to_string(c.context_width) + "], got " +
                     t::ShapeToString(context.shape()));
  }
  const Var step = Linear{"denoiser.step", c.step_embedding, c.width}.Apply(
      ctx, ctx.tape.Constant(SinusoidalEmbedding(steps, c.step_embedding)));
  const Var per_sample =
      t::Add(t::Add(t::MatMul(context, ctx.Param("denoiser.input.context")),
                    t::MatMul(step, ctx.Param("denoiser.input.step"))),
             ctx.Param("denoiser.input.bias"));
  Var x = t::Add(t::MatMul(noisy, ctx.Param("denoiser.input.y")),
                 t::ExpandTokens(per_sample, c.future_steps));
  x = t::Add(x, ctx.Param("denoiser.position"));
  for (int i = 0; i < c.layers; ++i) {
    x = TransformerLayer{Layer("denoiser.layer", i), c.width, c.heads,
                         c.ffn_width, c.dropout}
            .Apply(ctx, x);
  }
  x = Norm{"denoiser.output_norm", c.width}.Apply(ctx, x);
  return Linear{"denoiser.output", c.width, 2}.Apply(ctx, x);
}

// Scorer -------------------------------------------------------------------

Scorer::Scorer(ScorerConfig config) : config_(config) {
  CheckPositive(config_.future_steps, "future_steps");
  CheckPositive(config_.context_width, "context width");
  CheckPositive(config_.heads, "scorer heads");
  CheckPositive(config_.head_width, "scorer head width");
  CheckPositive(config_.width, "scorer width");
  CheckRate(config_.dropout);
}

void Scorer::Register(ParameterStore& store, std::mt19937_64& rng) const {
  const ScorerConfig& c = config_;
  const int64_t row = c.future_steps + c.context_width;
  Linear{"scorer.embed", 2 * c.future_steps, c.future_steps}.Register(store,
                                                                     rng);
  Attention{"scorer.attention", row, row, c.heads, c.head_width, c.width,
            false}
      .Register(store, rng);
  Linear{"scorer.mlp1", c.width, c.width}.Register(store, rng);
  Linear{"scorer.mlp2", c.width, c.width}.Register(store, rng);
  Linear{"scorer.down", c.width, 1, false}.Register(store, rng);
}

Var Scorer::Score(const ForwardContext& ctx, const Var& candidates,
                  const Var& context) const {
  const ScorerConfig& c = config_;
  const t::Shape& cs = candidates.shape();
  if (cs.size() != 4 || cs[2] != c.future_steps || cs[3] != 2) {
    throw ShapeError("scorer candidates must be [B, M, " +
                     std::to_string(c.future_steps) + ", 2], got " +
                     t::ShapeToString(cs));
  }
  const int64_t b = cs[0];
  const int64_t m = cs[1];
  if (context.shape() != t::Shape{b, c.context_width}) {
    throw ShapeError("scorer context must be [" + std::to_string(b) + ", " +
                     std::to_string(c.context_width) + "], got " +
                     t::ShapeToString(context.shape()));
  }
  const int64_t row = c.future_steps + c.context_width;
  const Var flat = t::Reshape(candidates, {b, m, 2 * c.future_steps});
  const Var embedded =
      Linear{"scorer.embed", 2 * c.future_steps, c.future_steps}.Apply(ctx,
                                                                       flat);
  const Var s = t::Concat({embedded, t::ExpandTokens(context, m)});
  const Var a = Attention{"scorer.attention", row, row, c.heads, c.head_width,
                          c.width, false}
                    .Apply(ctx, s, s);
  const Var mlp = Linear{"scorer.mlp2", c.width, c.width}.Apply(
      ctx, ctx.Dropout(
               t::Gelu(Linear{"scorer.mlp1", c.width, c.width}.Apply(ctx, a)),
               c.dropout));
  const Var scores =
      Linear{"scorer.down", c.width, 1, false}.Apply(ctx, t::Add(a, mlp));
  return t::Reshape(scores, {b, m});
}

}  // namespace trajdiff::networks
