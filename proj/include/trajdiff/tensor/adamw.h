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

#ifndef TRAJDIFF_TENSOR_ADAMW_H_
#define TRAJDIFF_TENSOR_ADAMW_H_

#include "trajdiff/tensor/parameter_store.h"

namespace trajdiff::tensor {

struct AdamWOptions {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

// One AdamW update of every parameter in `store`: decoupled weight decay,
// bias-corrected moments, step counter incremented. Every parameter needs a
// gradient of matching shape; the store is left untouched otherwise.
void AdamWStep(ParameterStore& store, const Gradients& grads,
               const AdamWOptions& options);

}  // namespace trajdiff::tensor

#endif  // TRAJDIFF_TENSOR_ADAMW_H_
