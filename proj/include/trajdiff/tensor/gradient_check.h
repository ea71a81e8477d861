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

#ifndef TRAJDIFF_TENSOR_GRADIENT_CHECK_H_
#define TRAJDIFF_TENSOR_GRADIENT_CHECK_H_

#include <cstdint>
#include <functional>
#include <string>

#include "trajdiff/tensor/parameter_store.h"
#include "trajdiff/tensor/tape.h"

namespace trajdiff::tensor {

// Builds a scalar loss on `tape` from the parameters in `store`. Must be a
// pure function of the parameter values: fixed dropout masks, fixed noise.
using LossClosure = std::function<Var(Tape& tape, const ParameterStore& store)>;

struct GradientCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor of the relative error, so gradients that vanish
  // analytically are compared in absolute terms.
  double floor = 1e-6;
  // 0 checks every entry; otherwise a seeded subset per parameter.
  int64_t max_entries_per_param = 0;
  uint64_t seed = 0;
};

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int64_t entries_checked = 0;
  bool passed = false;
};

// Compares tape gradients with central finite differences. Parameters are
// perturbed in place and restored. Throws ConfigError when two evaluations
// of the closure at identical parameters disagree.
GradientCheckReport GradientCheck(const LossClosure& closure,
                                  ParameterStore& store,
                                  const GradientCheckOptions& options = {});

}  // namespace trajdiff::tensor

#endif  // TRAJDIFF_TENSOR_GRADIENT_CHECK_H_
