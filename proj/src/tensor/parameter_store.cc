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

#include "trajdiff/tensor/parameter_store.h"

#include <cmath>
#include <cstring>

#include "trajdiff/errors.h"

namespace trajdiff::tensor {

ParameterStore::ParameterStore(const ParameterStore& other)
    : step_(other.step_) {
  // Deep copy: two stores must never alias parameter values.
  for (const auto& [name, e] : other.entries_) {
    entries_[name] = Entry{std::make_shared<Array>(*e.value), e.first_moment,
                           e.second_moment};
  }
}

ParameterStore& ParameterStore::operator=(const ParameterStore& other) {
  if (this != &other) {
    ParameterStore copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void ParameterStore::Add(const std::string& name, Array value) {
  if (entries_.contains(name)) {
    throw ConfigError("duplicate parameter name: " + name);
  }
  Array zeros(value.shape());
  entries_[name] =
      Entry{std::make_shared<Array>(std::move(value)), zeros, zeros};
}

void ParameterStore::AddUniform(const std::string& name, Shape shape,
                                int64_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Array value(std::move(shape));
  for (double& v : value.mutable_values()) v = dist(rng);
  Add(name, std::move(value));
}

bool ParameterStore::Contains(std::string_view name) const {
  return entries_.find(name) != entries_.end();
}

const ParameterStore::Entry& ParameterStore::entry(
    std::string_view name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw ConfigError("unknown parameter: " + std::string(name));
  }
  return it->second;
}

ParameterStore::Entry& ParameterStore::mutable_entry(std::string_view name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw ConfigError("unknown parameter: " + std::string(name));
  }
  return it->second;
}

const Array& ParameterStore::Get(std::string_view name) const {
  return *entry(name).value;
}

Array& ParameterStore::Mutable(std::string_view name) {
  return *mutable_entry(name).value;
}

std::shared_ptr<const Array> ParameterStore::Shared(
    std::string_view name) const {
  return entry(name).value;
}

std::vector<std::string> ParameterStore::Names() const {
  std::vector<std::string> names;
  names.reserve(entries_.size());
  for (const auto& [name, e] : entries_) names.push_back(name);
  return names;
}

int64_t ParameterStore::NumScalars() const {
  int64_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value->size();
  return n;
}

void ParameterStore::set_step(int64_t step) {
  if (step < 0) throw ConfigError("optimizer step must be non-negative");
  step_ = step;
}

uint64_t ParameterStore::Hash() const {
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [name, e] : entries_) {
    mix(name.data(), name.size());
    for (int64_t d : e.value->shape()) mix(&d, sizeof(d));
    mix(e.value->data(), sizeof(double) * e.value->size());
  }
  return h;
}

}  // namespace trajdiff::tensor
