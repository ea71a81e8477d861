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

#include "trajdiff/networks/layers.h"

#include <cmath>

#include "trajdiff/errors.h"
#include "trajdiff/tensor/ops.h"

namespace trajdiff::networks {

namespace t = tensor;

Var ForwardContext::Dropout(const Var& x, double rate) const {
  if (!training || rate <= 0.0) return x;
  if (dropout_rng == nullptr) {
    throw ConfigError("training-mode dropout needs an RNG");
  }
  std::bernoulli_distribution keep(1.0 - rate);
  Array mask(x.shape());
  for (double& m : mask.mutable_values()) m = keep(*dropout_rng) ? 1.0 : 0.0;
  return t::DropoutApply(x, mask, rate);
}

void Linear::Register(ParameterStore& store, std::mt19937_64& rng) const {
  store.AddUniform(name + ".weight", {in, out}, in, rng);
  if (bias) store.Add(name + ".bias", Array({out}));
}

Var Linear::Apply(const ForwardContext& ctx, const Var& x) const {
  Var y = t::MatMul(x, ctx.Param(name + ".weight"));
  if (bias) y = t::Add(y, ctx.Param(name + ".bias"));
  return y;
}

void Norm::Register(ParameterStore& store) const {
  store.Add(name + ".gain", Array::Full({width}, 1.0));
  store.Add(name + ".bias", Array({width}));
}

Var Norm::Apply(const ForwardContext& ctx, const Var& x) const {
  return t::Add(t::Mul(t::LayerNorm(x), ctx.Param(name + ".gain")),
                ctx.Param(name + ".bias"));
}

void Attention::Register(ParameterStore& store, std::mt19937_64& rng) const {
  const int64_t inner = heads * head_width;
  Linear{name + ".query", query_width, inner, bias}.Register(store, rng);
  Linear{name + ".key", key_width, inner, bias}.Register(store, rng);
  Linear{name + ".value", key_width, inner, bias}.Register(store, rng);
  Linear{name + ".output", inner, out_width, bias}.Register(store, rng);
}

Var Attention::Apply(const ForwardContext& ctx, const Var& query,
                     const Var& keys, const Array* mask) const {
  const int64_t inner = heads * head_width;
  const Var q = t::SplitHeads(
      Linear{name + ".query", query_width, inner, bias}.Apply(ctx, query),
      heads);
  const Var k = t::SplitHeads(
      Linear{name + ".key", key_width, inner, bias}.Apply(ctx, keys), heads);
  const Var v = t::SplitHeads(
      Linear{name + ".value", key_width, inner, bias}.Apply(ctx, keys), heads);
  Var scores = t::Scale(t::BatchMatMul(q, k, /*transpose_b=*/true),
                        1.0 / std::sqrt(static_cast<double>(head_width)));
  if (mask != nullptr) scores = t::Add(scores, ctx.tape.Constant(*mask));
  const Var mixed = t::MergeHeads(t::BatchMatMul(t::Softmax(scores), v), heads);
  return Linear{name + ".output", inner, out_width, bias}.Apply(ctx, mixed);
}

Attention TransformerLayer::attention() const {
  if (width % heads != 0) {
    throw ConfigError("width " + std::to_string(width) +
                      " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  return Attention{name + ".attention", width, width, heads, width / heads,
                   width, true};
}

void TransformerLayer::Register(ParameterStore& store,
                                std::mt19937_64& rng) const {
  Norm{name + ".norm1", width}.Register(store);
  attention().Register(store, rng);
  Norm{name + ".norm2", width}.Register(store);
  Linear{name + ".ffn1", width, ffn_width}.Register(store, rng);
  Linear{name + ".ffn2", ffn_width, width}.Register(store, rng);
}

Var TransformerLayer::Apply(const ForwardContext& ctx, const Var& x,
                            const Array* mask) const {
  const Var h = Norm{name + ".norm1", width}.Apply(ctx, x);
  Var y = t::Add(x, ctx.Dropout(attention().Apply(ctx, h, h, mask), dropout));
  const Var g = t::Gelu(Linear{name + ".ffn1", width, ffn_width}.Apply(
      ctx, Norm{name + ".norm2", width}.Apply(ctx, y)));
  const Var f = Linear{name + ".ffn2", ffn_width, width}.Apply(ctx, g);
  return t::Add(y, ctx.Dropout(f, dropout));
}

Array SinusoidalEmbedding(const std::vector<int>& positions, int64_t width) {
  if (positions.empty() || width < 2 || width % 2 != 0) {
    throw ShapeError("sinusoidal embedding needs positions and an even width");
  }
  const int64_t rows = static_cast<int64_t>(positions.size());
  Array out({rows, width});
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t i = 0; i < width / 2; ++i) {
      const double freq =
          std::pow(10000.0, -2.0 * static_cast<double>(i) / width);
      out[r * width + 2 * i] = std::sin(positions[r] * freq);
      out[r * width + 2 * i + 1] = std::cos(positions[r] * freq);
    }
  }
  return out;
}

}  // namespace trajdiff::networks
