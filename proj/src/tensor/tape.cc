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

#include "trajdiff/tensor/tape.h"

#include "trajdiff/errors.h"

namespace trajdiff::tensor {

std::string_view PrimitiveName(Primitive kind) {
  switch (kind) {
    case Primitive::kLeaf: return "leaf";
    case Primitive::kMatMul: return "matmul";
    case Primitive::kBatchMatMul: return "batch-matmul";
    case Primitive::kAdd: return "add";
    case Primitive::kMul: return "elementwise-mul";
    case Primitive::kConcat: return "concat-last-axis";
    case Primitive::kSoftmax: return "softmax-last-axis";
    case Primitive::kLayerNorm: return "layer-normalize-last-axis";
    case Primitive::kGelu: return "gelu";
    case Primitive::kScale: return "scale";
    case Primitive::kSum: return "sum";
    case Primitive::kMean: return "mean";
    case Primitive::kMse: return "mse";
    case Primitive::kSoftCrossEntropy: return "cross-entropy-with-soft-targets";
    case Primitive::kDropout: return "dropout-mask-apply";
    case Primitive::kReshape: return "reshape";
    case Primitive::kSplitHeads: return "split-heads";
    case Primitive::kMergeHeads: return "merge-heads";
    case Primitive::kExpandTokens: return "expand-tokens";
    case Primitive::kMeanTokens: return "mean-tokens";
    case Primitive::kGatherRows: return "gather-rows";
  }
  return "unknown";
}

const Array& Var::value() const {
  if (tape_ == nullptr) throw ShapeError("use of an unbound Var");
  return tape_->value(id_);
}

Var Tape::Leaf(std::shared_ptr<const Array> value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad && record_;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::Constant(Array value) {
  return Leaf(std::make_shared<const Array>(std::move(value)), false);
}

Var Tape::Input(Array value) {
  return Leaf(std::make_shared<const Array>(std::move(value)), true);
}

Var Tape::Param(const ParameterStore& store, const std::string& name) {
  if (auto it = params_.find(name); it != params_.end()) {
    return Var(this, it->second);
  }
  Var v = Leaf(store.Shared(name), true);
  params_.emplace(name, v.id());
  return v;
}

Var Tape::Record(Primitive kind, Array value, const std::vector<int>& inputs,
                 BackwardFn backward) {
  if (!value.AllFinite()) {
    throw NumericError("non-finite output from " +
                       std::string(PrimitiveName(kind)) + " with shape " +
                       ShapeToString(value.shape()));
  }
  Node node;
  node.kind = kind;
  node.value = std::make_shared<const Array>(std::move(value));
  if (record_) {
    for (int id : inputs) {
      if (nodes_[id].requires_grad) {
        node.requires_grad = true;
        break;
      }
    }
    if (node.requires_grad) {
      node.inputs = inputs;
      node.backward = std::move(backward);
    }
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Array* Tape::GradSlot(int id) {
  Node& node = nodes_[id];
  if (!node.requires_grad) return nullptr;
  if (!node.has_grad) {
    node.grad = Array(node.value->shape());
    node.has_grad = true;
  }
  return &node.grad;
}

void Tape::Backward(const Var& loss) {
  if (loss.tape() != this) throw ShapeError("loss belongs to another tape");
  if (consumed_) throw ShapeError("tape already consumed by Backward()");
  if (nodes_[loss.id()].value->size() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " +
                     ShapeToString(loss.shape()));
  }
  consumed_ = true;
  Array* seed = GradSlot(loss.id());
  if (seed == nullptr) return;
  (*seed)[0] = 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.has_grad || !node.backward) continue;
    node.backward(*this, *node.value, node.grad);
  }
}

Array Tape::Grad(const Var& v) const {
  const Node& node = nodes_[v.id()];
  if (node.has_grad) return node.grad;
  return Array(node.value->shape());
}

Gradients Tape::ParameterGradients() const {
  Gradients grads;
  for (const auto& [name, id] : params_) {
    const Node& node = nodes_[id];
    grads.emplace(name, node.has_grad ? node.grad : Array(node.value->shape()));
  }
  return grads;
}

}  // namespace trajdiff::tensor
