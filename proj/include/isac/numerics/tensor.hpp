// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "isac/errors.hpp"

namespace isac::num {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape);

/// Dense row-major real tensor.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    check_dims();
  }
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_dims();
    if (data_.size() != shape_size(shape_)) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                           shape_str(shape_));
    }
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), T(1)); }
  static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Same data, new shape of equal element count.
  Tensor reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) {
      throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool all_finite() const {
    for (T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Tensor& other) const = default;

 private:
  void check_dims() const {
    for (std::size_t d : shape_) {
      if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using cplx = std::complex<double>;

/// Dense row-major complex tensor; std::complex stores (real, imag) interleaved.
class ComplexTensor {
 public:
  ComplexTensor() = default;
  explicit ComplexTensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_)) {}
  ComplexTensor(Shape shape, std::vector<cplx> data);

  const Shape& shape() const { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  std::span<cplx> data() { return data_; }
  std::span<const cplx> data() const { return data_; }

  cplx& operator[](std::size_t i) { return data_[i]; }
  const cplx& operator[](std::size_t i) const { return data_[i]; }

  /// Real tensor of shape [2, ...shape]: plane 0 real parts, plane 1 imaginary parts.
  Tensor<double> to_real() const;
  static ComplexTensor from_real(const Tensor<double>& stacked);

  double energy() const;

  bool operator==(const ComplexTensor& other) const = default;

 private:
  Shape shape_;
  std::vector<cplx> data_;
};

/// Splits `shape` around `axis` into (outer, length, inner) extents for strided loops.
struct AxisExtents {
  std::size_t outer;
  std::size_t length;
  std::size_t inner;
};
AxisExtents axis_extents(const Shape& shape, std::size_t axis);

}  // namespace isac::num
