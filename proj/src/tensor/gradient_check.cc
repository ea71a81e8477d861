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

#include "trajdiff/tensor/gradient_check.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "trajdiff/errors.h"

namespace trajdiff::tensor {
namespace {

double Evaluate(const LossClosure& closure, const ParameterStore& store) {
  Tape tape(/*record_gradients=*/false);
  Var loss = closure(tape, store);
  if (loss.value().size() != 1) {
    throw ShapeError("gradient check needs a scalar loss, got " +
                     ShapeToString(loss.shape()));
  }
  return loss.value()[0];
}

}  // namespace

GradientCheckReport GradientCheck(const LossClosure& closure,
                                  ParameterStore& store,
                                  const GradientCheckOptions& options) {
  const double base = Evaluate(closure, store);
  if (Evaluate(closure, store) != base) {
    throw ConfigError(
        "gradient check closure is non-deterministic: two evaluations at "
        "identical parameters differ");
  }

  Gradients analytic;
  {
    Tape tape;
    Var loss = closure(tape, store);
    tape.Backward(loss);
    analytic = tape.ParameterGradients();
  }

  GradientCheckReport report;
  std::mt19937_64 rng(options.seed);
  for (const std::string& name : store.Names()) {
    Array& value = store.Mutable(name);
    auto it = analytic.find(name);
    const Array zeros(value.shape());
    const Array& grad = it == analytic.end() ? zeros : it->second;

    std::vector<int64_t> entries(value.size());
    std::iota(entries.begin(), entries.end(), 0);
    if (options.max_entries_per_param > 0 &&
        value.size() > options.max_entries_per_param) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries_per_param);
    }

    for (int64_t i : entries) {
      const double saved = value[i];
      value[i] = saved + options.step;
      const double plus = Evaluate(closure, store);
      value[i] = saved - options.step;
      const double minus = Evaluate(closure, store);
      value[i] = saved;

      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = grad[i];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.entries_checked;
      if (rel > report.max_relative_error || report.worst_index < 0) {
        report.max_relative_error = rel;
        report.worst_parameter = name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace trajdiff::tensor
