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

#ifndef TRAJDIFF_TENSOR_ARRAY_H_
#define TRAJDIFF_TENSOR_ARRAY_H_

#include <cstddef>
#include <cstdint>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace trajdiff::tensor {

using Shape = std::vector<int64_t>;

std::string ShapeToString(const Shape& shape);

// Number of elements described by `shape`. Throws ShapeError on a
// non-positive extent.
int64_t NumElements(const Shape& shape);

// Cache-line aligned storage. Eigen picks its vectorized reduction order
// from the buffer address, so unaligned heap blocks would make results
// differ in the last bit from run to run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
};

using AlignedVector = std::vector<double, AlignedAllocator<double>>;

// Dense row-major array of doubles. A rank-0 shape denotes a scalar.
class Array {
 public:
  Array() = default;
  explicit Array(Shape shape);
  Array(Shape shape, std::vector<double> values);

  static Array Zeros(Shape shape) { return Array(std::move(shape)); }
  static Array Full(Shape shape, double value);
  static Array Scalar(double value);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  // Extent of axis `axis`; negative values count from the back.
  int64_t dim(int axis) const;
  int64_t size() const { return static_cast<int64_t>(values_.size()); }
  bool is_scalar() const { return values_.size() == 1; }

  std::span<const double> values() const { return values_; }
  std::span<double> mutable_values() { return values_; }
  const double* data() const { return values_.data(); }
  double* data() { return values_.data(); }

  double operator[](int64_t i) const { return values_[i]; }
  double& operator[](int64_t i) { return values_[i]; }

  // Same values, new shape with identical element count.
  Array Reshaped(Shape shape) const;

  bool AllFinite() const;

  friend bool operator==(const Array& a, const Array& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  AlignedVector values_;
};

}  // namespace trajdiff::tensor

#endif  // TRAJDIFF_TENSOR_ARRAY_H_
