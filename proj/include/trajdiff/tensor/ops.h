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

// Differentiable primitives. Every function records itself on the tape of
// its operands, throws ShapeError on non-conforming shapes, and throws
// NumericError when the result is not finite.

#ifndef TRAJDIFF_TENSOR_OPS_H_
#define TRAJDIFF_TENSOR_OPS_H_

#include <cstdint>
#include <vector>

#include "trajdiff/tensor/array.h"
#include "trajdiff/tensor/tape.h"

namespace trajdiff::tensor {

inline constexpr double kLayerNormEpsilon = 1e-5;

// a: [..., m, k], b: [k, n] -> [..., m, n].
Var MatMul(const Var& a, const Var& b);

// a: [B, m, k], b: [B, k, n] (or [B, n, k] with transpose_b) -> [B, m, n].
Var BatchMatMul(const Var& a, const Var& b, bool transpose_b = false);

// b must have a's shape or a suffix of it; b is then tiled over the
// leading axes of a.
Var Add(const Var& a, const Var& b);
Var Mul(const Var& a, const Var& b);
Var Sub(const Var& a, const Var& b);

// Concatenates along the last axis; all leading extents must agree.
Var Concat(const std::vector<Var>& parts);

Var Softmax(const Var& x);
// Zero-mean, unit (biased) variance per row of the last axis.
Var LayerNorm(const Var& x, double eps = kLayerNormEpsilon);
// Exact erf formulation.
Var Gelu(const Var& x);
Var Scale(const Var& x, double c);

Var Sum(const Var& x);
Var Mean(const Var& x);
// Mean of squared differences over all elements.
Var Mse(const Var& a, const Var& b);
// Mean over rows of -sum_j t_j log softmax(logits)_j.
Var SoftCrossEntropy(const Var& logits, const Var& targets);

// x * mask / (1 - rate). The caller draws the 0/1 mask.
Var DropoutApply(const Var& x, const Array& mask, double rate);

Var Reshape(const Var& x, Shape shape);
// [B, T, h*d] -> [B*h, T, d].
Var SplitHeads(const Var& x, int64_t heads);
// [B*h, T, d] -> [B, T, h*d].
Var MergeHeads(const Var& x, int64_t heads);
// [B, d] -> [B, T, d] by repetition.
Var ExpandTokens(const Var& x, int64_t tokens);
// [B, T, d] -> [B, d].
Var MeanTokens(const Var& x);
// Selects entries of the leading axis.
Var GatherRows(const Var& x, const std::vector<int64_t>& rows);

}  // namespace trajdiff::tensor

#endif  // TRAJDIFF_TENSOR_OPS_H_
