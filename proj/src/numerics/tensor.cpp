// SPDX-License-Identifier: Apache-2.0
#include "isac/numerics/tensor.hpp"

#include <sstream>

namespace isac::num {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

AxisExtents axis_extents(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  }
  AxisExtents e{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) e.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) e.inner *= shape[i];
  return e;
}

ComplexTensor::ComplexTensor(Shape shape, std::vector<cplx> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw DimensionError("complex tensor data length does not match shape " + shape_str(shape_));
  }
}

Tensor<double> ComplexTensor::to_real() const {
  Shape s{2};
  s.insert(s.end(), shape_.begin(), shape_.end());
  Tensor<double> out(s);
  const std::size_t n = data_.size();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = data_[i].real();
    out[n + i] = data_[i].imag();
  }
  return out;
}

ComplexTensor ComplexTensor::from_real(const Tensor<double>& stacked) {
  if (stacked.rank() < 2 || stacked.dim(0) != 2) {
    throw DimensionError("expected leading axis of size 2, got " + shape_str(stacked.shape()));
  }
  Shape s(stacked.shape().begin() + 1, stacked.shape().end());
  ComplexTensor out(s);
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = {stacked[i], stacked[n + i]};
  return out;
}

double ComplexTensor::energy() const {
  double e = 0.0;
  for (const auto& v : data_) e += std::norm(v);
  return e;
}

}  // namespace isac::num
