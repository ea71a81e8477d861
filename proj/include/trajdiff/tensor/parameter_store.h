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

#ifndef TRAJDIFF_TENSOR_PARAMETER_STORE_H_
#define TRAJDIFF_TENSOR_PARAMETER_STORE_H_

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "trajdiff/tensor/array.h"

namespace trajdiff::tensor {

using Gradients = std::map<std::string, Array, std::less<>>;

// Named trainable parameters plus AdamW moment accumulators.
//
// Values are held behind shared pointers so a Tape can reference them
// without copying. The store is only mutated between forward passes.
class ParameterStore {
 public:
  struct Entry {
    std::shared_ptr<Array> value;
    Array first_moment;
    Array second_moment;
  };

  ParameterStore() = default;
  ParameterStore(const ParameterStore& other);
  ParameterStore& operator=(const ParameterStore& other);
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  // Registers a new parameter with zeroed moments. Duplicate names throw.
  void Add(const std::string& name, Array value);

  // Uniform in +-sqrt(1/fan_in), the scheme used for every weight matrix.
  void AddUniform(const std::string& name, Shape shape, int64_t fan_in,
                  std::mt19937_64& rng);

  bool Contains(std::string_view name) const;
  const Array& Get(std::string_view name) const;
  Array& Mutable(std::string_view name);
  std::shared_ptr<const Array> Shared(std::string_view name) const;

  const Entry& entry(std::string_view name) const;
  Entry& mutable_entry(std::string_view name);

  std::vector<std::string> Names() const;
  size_t size() const { return entries_.size(); }
  int64_t NumScalars() const;

  int64_t step() const { return step_; }
  void set_step(int64_t step);

  // FNV-1a over names, shapes and value bytes. Used to prove that frozen
  // weights were not touched.
  uint64_t Hash() const;

 private:
  std::map<std::string, Entry, std::less<>> entries_;
  int64_t step_ = 0;
};

}  // namespace trajdiff::tensor

#endif  // TRAJDIFF_TENSOR_PARAMETER_STORE_H_
