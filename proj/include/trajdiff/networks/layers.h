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

// Building blocks shared by the encoder, denoiser and scorer. Each layer is
// a small value type holding its name and dimensions; Register() creates
// the parameters and Apply() records the forward pass on a tape.

#ifndef TRAJDIFF_NETWORKS_LAYERS_H_
#define TRAJDIFF_NETWORKS_LAYERS_H_

#include <cstdint>
#include <random>
#include <string>

#include "trajdiff/tensor/array.h"
#include "trajdiff/tensor/parameter_store.h"
#include "trajdiff/tensor/tape.h"

namespace trajdiff::networks {

using tensor::Array;
using tensor::ParameterStore;
using tensor::Tape;
using tensor::Var;

// Additive attention mask value for disallowed pairs.
inline constexpr double kMaskedLogit = -1e9;

struct ForwardContext {
  Tape& tape;
  const ParameterStore& store;
  bool training = false;
  std::mt19937_64* dropout_rng = nullptr;

  Var Param(const std::string& name) const { return tape.Param(store, name); }
  // Identity unless training with rate > 0; then needs dropout_rng.
  Var Dropout(const Var& x, double rate) const;
};

struct Linear {
  std::string name;
  int64_t in = 0;
  int64_t out = 0;
  bool bias = true;

  void Register(ParameterStore& store, std::mt19937_64& rng) const;
  Var Apply(const ForwardContext& ctx, const Var& x) const;
};

// LayerNorm with learned gain and bias.
struct Norm {
  std::string name;
  int64_t width = 0;

  void Register(ParameterStore& store) const;
  Var Apply(const ForwardContext& ctx, const Var& x) const;
};

struct Attention {
  std::string name;
  int64_t query_width = 0;
  int64_t key_width = 0;
  int64_t heads = 4;
  int64_t head_width = 32;
  int64_t out_width = 128;
  bool bias = true;

  void Register(ParameterStore& store, std::mt19937_64& rng) const;
  // query: [B, Tq, query_width], keys: [B, Tk, key_width]. `mask` is an
  // optional additive [Tq, Tk] or [B*heads, Tq, Tk] array.
  Var Apply(const ForwardContext& ctx, const Var& query, const Var& keys,
            const Array* mask = nullptr) const;
};

// Pre-norm transformer layer: self-attention then a GELU feed-forward,
// each wrapped in a residual connection.
struct TransformerLayer {
  std::string name;
  int64_t width = 128;
  int64_t heads = 4;
  int64_t ffn_width = 256;
  double dropout = 0.1;

  void Register(ParameterStore& store, std::mt19937_64& rng) const;
  Var Apply(const ForwardContext& ctx, const Var& x,
            const Array* mask = nullptr) const;

 private:
  Attention attention() const;
};

// [rows, width] sinusoidal features of the given positions.
Array SinusoidalEmbedding(const std::vector<int>& positions, int64_t width);

}  // namespace trajdiff::networks

#endif  // TRAJDIFF_NETWORKS_LAYERS_H_
