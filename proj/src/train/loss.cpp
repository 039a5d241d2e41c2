// SPDX-License-Identifier: Apache-2.0
#include "isac/train/loss.hpp"

namespace isac::train {

double nmse(const ComplexTensor& pred, const ComplexTensor& truth) {
  if (pred.shape() != truth.shape()) throw DimensionError("nmse: prediction and truth shapes differ");
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    err += std::norm(pred[i] - truth[i]);
    ref += std::norm(truth[i]);
  }
  if (ref == 0.0) throw DegenerateError("nmse: truth is all zeros");
  return err / ref;
}

template <typename T>
double energy(const Tensor<T>& x) {
  double e = 0.0;
  for (T v : x.data()) e += static_cast<double>(v) * v;
  return e;
}

template <typename T>
double nmse(const Tensor<T>& pred, const Tensor<T>& truth) {
  if (pred.shape() != truth.shape()) throw DimensionError("nmse: prediction and truth shapes differ");
  double err = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - truth[i];
    err += d * d;
  }
  const double ref = energy(truth);
  if (ref == 0.0) throw DegenerateError("nmse: truth is all zeros");
  return err / ref;
}

template <typename T>
Var<T> scaled_squared_error(Var<T> pred, const Tensor<T>& truth, double denominator) {
  if (pred.shape() != truth.shape()) throw DimensionError("nmse: prediction and truth shapes differ");
  if (!(denominator > 0.0)) throw DegenerateError("nmse: truth is all zeros");
  auto& g = *pred.graph();
  return num::scale(num::sum_squares(num::sub(pred, g.constant(truth))), static_cast<T>(1.0 / denominator));
}

template <typename T>
Var<T> nmse_loss(Var<T> pred, const Tensor<T>& truth) {
  return scaled_squared_error(pred, truth, energy(truth));
}

#define ISAC_INSTANTIATE_LOSS(T)                                                   \
  template double energy<T>(const Tensor<T>&);                                    \
  template double nmse<T>(const Tensor<T>&, const Tensor<T>&);                    \
  template Var<T> scaled_squared_error<T>(Var<T>, const Tensor<T>&, double);      \
  template Var<T> nmse_loss<T>(Var<T>, const Tensor<T>&);

ISAC_INSTANTIATE_LOSS(float)
ISAC_INSTANTIATE_LOSS(double)

}  // namespace isac::train
