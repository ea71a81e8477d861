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

#ifndef TRAJDIFF_TENSOR_TAPE_H_
#define TRAJDIFF_TENSOR_TAPE_H_

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "trajdiff/tensor/array.h"
#include "trajdiff/tensor/parameter_store.h"

namespace trajdiff::tensor {

enum class Primitive {
  kLeaf,
  kMatMul,
  kBatchMatMul,
  kAdd,
  kMul,
  kConcat,
  kSoftmax,
  kLayerNorm,
  kGelu,
  kScale,
  kSum,
  kMean,
  kMse,
  kSoftCrossEntropy,
  kDropout,
  kReshape,
  kSplitHeads,
  kMergeHeads,
  kExpandTokens,
  kMeanTokens,
  kGatherRows,
};

std::string_view PrimitiveName(Primitive kind);

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Array& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Ordered record of primitive applications for reverse-mode
// differentiation. Records are appended in evaluation order, so walking them
// backwards is a valid reverse topological order.
//
// A tape built with `record_gradients = false` keeps values only; this is
// the inference path. A Tape is single-owner and must not be shared across
// threads.
class Tape {
 public:
  // Receives the node's output value and its gradient, and pushes
  // contributions into the input gradient slots via GradSlot().
  using BackwardFn = std::function<void(Tape& tape, const Array& out,
                                        const Array& grad_out)>;

  explicit Tape(bool record_gradients = true)
      : record_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var Constant(Array value);
  // Differentiable leaf whose gradient is available through Grad().
  Var Input(Array value);
  // Binds a stored parameter without copying it. Repeated binds of the
  // same name return the same node.
  Var Param(const ParameterStore& store, const std::string& name);

  // Appends a primitive application. `backward` is dropped when no input
  // requires a gradient.
  Var Record(Primitive kind, Array value, const std::vector<int>& inputs,
             BackwardFn backward);

  const Array& value(int id) const { return *nodes_[id].value; }
  bool RequiresGrad(int id) const { return nodes_[id].requires_grad; }
  // Gradient accumulator for `id`, zero-initialized on first use. Returns
  // nullptr for nodes that do not require a gradient.
  Array* GradSlot(int id);

  // Reverse sweep from a scalar loss. The tape is consumed afterwards.
  void Backward(const Var& loss);

  // Gradient of the last Backward() loss w.r.t. `v`; zeros if unused.
  Array Grad(const Var& v) const;
  Gradients ParameterGradients() const;

  size_t num_records() const { return nodes_.size(); }
  Primitive kind(int id) const { return nodes_[id].kind; }
  const std::vector<int>& inputs(int id) const { return nodes_[id].inputs; }

 private:
  struct Node {
    Primitive kind = Primitive::kLeaf;
    std::shared_ptr<const Array> value;
    std::vector<int> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    Array grad;
    bool has_grad = false;
  };

  Var Leaf(std::shared_ptr<const Array> value, bool requires_grad);

  std::vector<Node> nodes_;
  std::map<std::string, int, std::less<>> params_;
  bool record_;
  bool consumed_ = false;
};

}  // namespace trajdiff::tensor

#endif  // TRAJDIFF_TENSOR_TAPE_H_
