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

#include "trajdiff/tensor/adamw.h"

#include <cmath>

#include "trajdiff/errors.h"

namespace trajdiff::tensor {

void AdamWStep(ParameterStore& store, const Gradients& grads,
               const AdamWOptions& options) {
  const std::vector<std::string> names = store.Names();
  for (const std::string& name : names) {
    auto it = grads.find(name);
    if (it == grads.end()) {
      throw ShapeError("missing gradient for parameter " + name);
    }
    if (it->second.shape() != store.Get(name).shape()) {
      throw ShapeError("gradient for " + name + " has shape " +
                       ShapeToString(it->second.shape()) + ", parameter has " +
                       ShapeToString(store.Get(name).shape()));
    }
  }

  const int64_t step = store.step() + 1;
  const double bias1 = 1.0 - std::pow(options.beta1, static_cast<double>(step));
  const double bias2 = 1.0 - std::pow(options.beta2, static_cast<double>(step));
  const double decay = 1.0 - options.learning_rate * options.weight_decay;
  for (const std::string& name : names) {
    ParameterStore::Entry& e = store.mutable_entry(name);
    const Array& g = grads.find(name)->second;
    double* p = e.value->data();
    double* m = e.first_moment.data();
    double* v = e.second_moment.data();
    for (int64_t i = 0; i < g.size(); ++i) {
      p[i] *= decay;
      m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * g[i];
      v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p[i] -= options.learning_rate * m_hat / (std::sqrt(v_hat) + options.epsilon);
    }
  }
  store.set_step(step);
}

}  // namespace trajdiff::tensor
