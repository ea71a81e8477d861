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

#include "trajdiff/tensor/array.h"

#include <cmath>
#include <sstream>

#include "trajdiff/errors.h"

namespace trajdiff::tensor {

std::string ShapeToString(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

int64_t NumElements(const Shape& shape) {
  int64_t n = 1;
  for (int64_t extent : shape) {
    if (extent <= 0) {
      throw ShapeError("non-positive extent in shape " + ShapeToString(shape));
    }
    n *= extent;
  }
  return n;
}

Array::Array(Shape shape)
    : shape_(std::move(shape)), values_(NumElements(shape_), 0.0) {}

Array::Array(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(values.begin(), values.end()) {
  if (NumElements(shape_) != static_cast<int64_t>(values_.size())) {
    throw ShapeError("shape " + ShapeToString(shape_) + " needs " +
                     std::to_string(NumElements(shape_)) + " values, got " +
                     std::to_string(values_.size()));
  }
}

Array Array::Full(Shape shape, double value) {
  Array out(std::move(shape));
  for (double& v : out.values_) v = value;
  return out;
}

Array Array::Scalar(double value) { return Array({}, {value}); }

int64_t Array::dim(int axis) const {
  const int r = rank();
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     ShapeToString(shape_));
  }
  return shape_[a];
}

Array Array::Reshaped(Shape shape) const {
  if (NumElements(shape) != size()) {
    throw ShapeError("cannot reshape " + ShapeToString(shape_) + " to " +
                     ShapeToString(shape));
  }
  Array out = *this;
  out.shape_ = std::move(shape);
  return out;
}

bool Array::AllFinite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace trajdiff::tensor
