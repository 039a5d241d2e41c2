// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "isac/numerics/autodiff.hpp"
#include "kernels.hpp"

namespace isac::num {
namespace {

template <typename T>
Graph<T>& graph_of(Var<T> a) {
  if (!a.valid()) throw UsageError("operation on an empty Var");
  return *a.graph();
}

template <typename T>
void same_graph(Var<T> a, Var<T> b) {
  if (a.graph() != b.graph()) throw UsageError("operands belong to different graphs");
}

// Number of times b repeats to cover a: equal shapes or b a suffix of a.
std::size_t broadcast_repeat(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return 1;
  if (b.size() <= a.size() && std::equal(b.rbegin(), b.rend(), a.rbegin())) {
    return shape_size(a) / shape_size(b);
  }
  throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(b) + " onto " + shape_str(a));
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

template <typename T>
Var<T> unary(Var<T> x, std::string_view op, T (*f)(T)) {
  auto& g = graph_of(x);
  Tensor<T> y(x.shape());
  const auto xv = x.value().data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  return g.make(op, std::move(y), {x.id()}, nullptr);
}

template <typename T>
T sigmoid_fn(T v) {
  return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
}

template <typename T>
constexpr T gelu_c() {
  return static_cast<T>(0.79788456080286535588);  // sqrt(2/pi)
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  same_graph(a, b);
  const std::size_t rep = broadcast_repeat(a.shape(), b.shape(), "add");
  Tensor<T> y = a.value();
  const auto bv = b.value().data();
  const std::size_t bn = bv.size();
  for (std::size_t r = 0; r < rep; ++r) {
    T* dst = y.data().data() + r * bn;
    for (std::size_t i = 0; i < bn; ++i) dst[i] += bv[i];
  }
  const std::size_t ia = a.id(), ib = b.id();
  return graph_of(a).make("add", std::move(y), {ia, ib}, [ia, ib, rep](Graph<T>& g, std::size_t self) {
    const auto& gy = g.node(self).grad;
    if (g.node(ia).requires_grad) add_into(g.grad_buffer(ia), gy);
    if (g.node(ib).requires_grad) {
      auto& gb = g.grad_buffer(ib);
      const std::size_t bn = gb.size();
      for (std::size_t r = 0; r < rep; ++r) {
        const T* src = gy.data().data() + r * bn;
        for (std::size_t i = 0; i < bn; ++i) gb[i] += src[i];
      }
    }
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  same_graph(a, b);
  const std::size_t rep = broadcast_repeat(a.shape(), b.shape(), "sub");
  Tensor<T> y = a.value();
  const auto bv = b.value().data();
  const std::size_t bn = bv.size();
  for (std::size_t r = 0; r < rep; ++r) {
    T* dst = y.data().data() + r * bn;
    for (std::size_t i = 0; i < bn; ++i) dst[i] -= bv[i];
  }
  const std::size_t ia = a.id(), ib = b.id();
  return graph_of(a).make("sub", std::move(y), {ia, ib}, [ia, ib, rep](Graph<T>& g, std::size_t self) {
    const auto& gy = g.node(self).grad;
    if (g.node(ia).requires_grad) add_into(g.grad_buffer(ia), gy);
    if (g.node(ib).requires_grad) {
      auto& gb = g.grad_buffer(ib);
      const std::size_t bn = gb.size();
      for (std::size_t r = 0; r < rep; ++r) {
        const T* src = gy.data().data() + r * bn;
        for (std::size_t i = 0; i < bn; ++i) gb[i] -= src[i];
      }
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  same_graph(a, b);
  const std::size_t rep = broadcast_repeat(a.shape(), b.shape(), "mul");
  Tensor<T> y = a.value();
  const auto bv = b.value().data();
  const std::size_t bn = bv.size();
  for (std::size_t r = 0; r < rep; ++r) {
    T* dst = y.data().data() + r * bn;
    for (std::size_t i = 0; i < bn; ++i) dst[i] *= bv[i];
  }
  const std::size_t ia = a.id(), ib = b.id();
  return graph_of(a).make("mul", std::move(y), {ia, ib}, [ia, ib, rep](Graph<T>& g, std::size_t self) {
    const auto& gy = g.node(self).grad;
    const auto& av = g.node(ia).value;
    const auto& bv = g.node(ib).value;
    const std::size_t bn = bv.size();
    if (g.node(ia).requires_grad) {
      auto& ga = g.grad_buffer(ia);
      for (std::size_t r = 0; r < rep; ++r) {
        for (std::size_t i = 0; i < bn; ++i) ga[r * bn + i] += gy[r * bn + i] * bv[i];
      }
    }
    if (g.node(ib).requires_grad) {
      auto& gb = g.grad_buffer(ib);
      for (std::size_t r = 0; r < rep; ++r) {
        for (std::size_t i = 0; i < bn; ++i) gb[i] += gy[r * bn + i] * av[r * bn + i];
      }
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  Tensor<T> y = a.value();
  for (auto& v : y.vec()) v *= factor;
  const std::size_t ia = a.id();
  return graph_of(a).make("scale", std::move(y), {ia}, [ia, factor](Graph<T>& g, std::size_t self) {
    const auto& gy = g.node(self).grad;
    auto& ga = g.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * gy[i];
  });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  auto y = unary<T>(x, "sigmoid", &sigmoid_fn<T>);
  auto& n = x.graph()->node(y.id());
  const std::size_t ix = x.id();
  if (n.requires_grad) {
    n.backward = [ix](Graph<T>& g, std::size_t self) {
      const auto& gy = g.node(self).grad;
      const auto& yv = g.node(self).value;
      auto& gx = g.grad_buffer(ix);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * yv[i] * (T(1) - yv[i]);
    };
  }
  return y;
}

template <typename T>
Var<T> tanh(Var<T> x) {
  auto y = unary<T>(x, "tanh", [](T v) { return std::tanh(v); });
  auto& n = x.graph()->node(y.id());
  const std::size_t ix = x.id();
  if (n.requires_grad) {
    n.backward = [ix](Graph<T>& g, std::size_t self) {
      const auto& gy = g.node(self).grad;
      const auto& yv = g.node(self).value;
      auto& gx = g.grad_buffer(ix);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * (T(1) - yv[i] * yv[i]);
    };
  }
  return y;
}

template <typename T>
Var<T> gelu(Var<T> x) {
  auto y = unary<T>(x, "gelu", [](T v) {
    const T inner = gelu_c<T>() * (v + T(0.044715) * v * v * v);
    return T(0.5) * v * (T(1) + std::tanh(inner));
  });
  auto& n = x.graph()->node(y.id());
  const std::size_t ix = x.id();
  if (n.requires_grad) {
    n.backward = [ix](Graph<T>& g, std::size_t self) {
      const auto& gy = g.node(self).grad;
      const auto& xv = g.node(ix).value;
      auto& gx = g.grad_buffer(ix);
      for (std::size_t i = 0; i < gx.size(); ++i) {
        const T v = xv[i];
        const T inner = gelu_c<T>() * (v + T(0.044715) * v * v * v);
        const T t = std::tanh(inner);
        const T dinner = gelu_c<T>() * (T(1) + T(3) * T(0.044715) * v * v);
        const T d = T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * dinner;
        gx[i] += gy[i] * d;
      }
    };
  }
  return y;
}

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b, bool trans_b) {
  same_graph(a, b);
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() < 2 || bs.size() < 2) throw DimensionError("matmul operands must have rank >= 2");
  const std::size_t m = as[as.size() - 2];
  const std::size_t k = as.back();
  const std::size_t bk = trans_b ? bs.back() : bs[bs.size() - 2];
  const std::size_t n = trans_b ? bs[bs.size() - 2] : bs.back();
  if (bk != k) {
    throw DimensionError("matmul inner dimensions differ: " + shape_str(as) + " x " + shape_str(bs) +
                         (trans_b ? "^T" : ""));
  }
  const bool shared = bs.size() == 2;
  if (!shared && !std::equal(as.begin(), as.end() - 2, bs.begin(), bs.end() - 2)) {
    throw DimensionError("matmul batch dimensions differ: " + shape_str(as) + " x " + shape_str(bs));
  }
  const std::size_t batch = shape_size(as) / (m * k);
  Shape ys(as.begin(), as.end() - 2);
  ys.push_back(m);
  ys.push_back(n);
  Tensor<T> y(ys);
  const T* A = a.value().data().data();
  const T* B = b.value().data().data();
  T* C = y.data().data();
  if (shared) {
    if (trans_b) kernels::gemm_nt(A, B, C, batch * m, k, n);
    else kernels::gemm_nn(A, B, C, batch * m, k, n);
  } else {
    for (std::size_t s = 0; s < batch; ++s) {
      if (trans_b) kernels::gemm_nt(A + s * m * k, B + s * n * k, C + s * m * n, m, k, n);
      else kernels::gemm_nn(A + s * m * k, B + s * k * n, C + s * m * n, m, k, n);
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return graph_of(a).make("matmul", std::move(y), {ia, ib},
                          [ia, ib, m, k, n, batch, shared, trans_b](Graph<T>& g, std::size_t self) {
    const T* dC = g.node(self).grad.data().data();
    const T* A = g.node(ia).value.data().data();
    const T* B = g.node(ib).value.data().data();
    const std::size_t rows = shared ? batch * m : m;
    const std::size_t reps = shared ? 1 : batch;
    const std::size_t bstride = shared ? 0 : n * k;
    if (g.node(ia).requires_grad) {
      T* dA = g.grad_buffer(ia).data().data();
      for (std::size_t s = 0; s < reps; ++s) {
        if (trans_b) kernels::gemm_nn(dC + s * rows * n, B + s * bstride, dA + s * rows * k, rows, n, k);
        else kernels::gemm_nt(dC + s * rows * n, B + s * bstride, dA + s * rows * k, rows, n, k);
      }
    }
    if (g.node(ib).requires_grad) {
      T* dB = g.grad_buffer(ib).data().data();
      for (std::size_t s = 0; s < reps; ++s) {
        if (trans_b) kernels::gemm_tn(dC + s * rows * n, A + s * rows * k, dB + s * bstride, rows, n, k);
        else kernels::gemm_tn(A + s * rows * k, dC + s * rows * n, dB + s * bstride, rows, k, n);
      }
    }
  });
}

template <typename T>
Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias) {
  same_graph(x, weight);
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws.size() != 2 || xs.empty() || xs.back() != ws[0]) {
    throw DimensionError("linear: input " + shape_str(xs) + " incompatible with weight " + shape_str(ws));
  }
  const std::size_t in = ws[0];
  const std::size_t out = ws[1];
  const bool has_bias = bias.valid();
  if (has_bias && (bias.shape().size() != 1 || bias.shape()[0] != out)) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " does not match output width");
  }
  const std::size_t rows = x.value().size() / in;
  Shape ys = xs;
  ys.back() = out;
  Tensor<T> y(ys);
  T* Y = y.data().data();
  if (has_bias) {
    const T* bv = bias.value().data().data();
    for (std::size_t r = 0; r < rows; ++r) std::copy(bv, bv + out, Y + r * out);
  }
  kernels::gemm_nn(x.value().data().data(), weight.value().data().data(), Y, rows, in, out);
  std::vector<std::size_t> parents{x.id(), weight.id()};
  if (has_bias) parents.push_back(bias.id());
  const std::size_t ix = x.id(), iw = weight.id(), ib = has_bias ? bias.id() : 0;
  return graph_of(x).make("linear", std::move(y), std::move(parents),
                          [ix, iw, ib, has_bias, rows, in, out](Graph<T>& g, std::size_t self) {
    const T* dY = g.node(self).grad.data().data();
    if (g.node(ix).requires_grad) {
      kernels::gemm_nt(dY, g.node(iw).value.data().data(), g.grad_buffer(ix).data().data(), rows, out, in);
    }
    if (g.node(iw).requires_grad) {
      kernels::gemm_tn(g.node(ix).value.data().data(), dY, g.grad_buffer(iw).data().data(), rows, in, out);
    }
    if (has_bias && g.node(ib).requires_grad) {
      T* db = g.grad_buffer(ib).data().data();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t o = 0; o < out; ++o) db[o] += dY[r * out + o];
      }
    }
  });
}

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> kernels, Var<T> bias) {
  same_graph(x, kernels);
  const Shape& xs = x.shape();
  const Shape& ks = kernels.shape();
  if (ks.size() != 4) throw DimensionError("conv2d: kernels must be [C_out, C_in, kh, kw]");
  if (ks[2] % 2 == 0 || ks[3] % 2 == 0) {
    throw ConfigError("conv2d: kernel dimensions must be odd, got " + shape_str(ks));
  }
  if (xs.size() != 3 && xs.size() != 4) throw DimensionError("conv2d: input must be [C,H,W] or [B,C,H,W]");
  const std::size_t off = xs.size() - 3;
  const kernels::ConvDims d{off ? xs[0] : 1, xs[off], xs[off + 1], xs[off + 2], ks[0], ks[2], ks[3]};
  if (ks[1] != d.cin) {
    throw DimensionError("conv2d: input channels " + std::to_string(d.cin) + " vs kernel " + shape_str(ks));
  }
  const bool has_bias = bias.valid();
  if (has_bias && (bias.shape().size() != 1 || bias.shape()[0] != d.cout)) {
    throw DimensionError("conv2d: bias must be [C_out]");
  }
  Shape ys = xs;
  ys[off] = d.cout;
  Tensor<T> y(ys);
  kernels::conv2d_forward(x.value().data().data(), kernels.value().data().data(),
                          has_bias ? bias.value().data().data() : nullptr, y.data().data(), d);
  std::vector<std::size_t> parents{x.id(), kernels.id()};
  if (has_bias) parents.push_back(bias.id());
  const std::size_t ix = x.id(), ik = kernels.id(), ib = has_bias ? bias.id() : 0;
  return graph_of(x).make("conv2d", std::move(y), std::move(parents),
                          [ix, ik, ib, has_bias, d](Graph<T>& g, std::size_t self) {
    const T* dY = g.node(self).grad.data().data();
    T* dX = g.node(ix).requires_grad ? g.grad_buffer(ix).data().data() : nullptr;
    T* dK = g.node(ik).requires_grad ? g.grad_buffer(ik).data().data() : nullptr;
    T* dB = (has_bias && g.node(ib).requires_grad) ? g.grad_buffer(ib).data().data() : nullptr;
    kernels::conv2d_backward(g.node(ix).value.data().data(), g.node(ik).value.data().data(), dY, dX, dK, dB, d);
  });
}

template <typename T>
Var<T> softmax(Var<T> x, std::size_t axis, bool causal) {
  const Shape& xs = x.shape();
  const auto e = axis_extents(xs, axis);
  if (causal && (axis + 1 != xs.size() || xs.size() < 2)) {
    throw UsageError("causal softmax requires the last axis of a rank >= 2 tensor");
  }
  const std::size_t rows_per_block = causal ? xs[xs.size() - 2] : 1;
  Tensor<T> y(xs);
  const auto xv = x.value().data();
  for (std::size_t o = 0; o < e.outer; ++o) {
    // Under the causal mask, row i may attend to columns 0..i only.
    const std::size_t limit = causal ? std::min(e.length, o % rows_per_block + 1) : e.length;
    for (std::size_t i = 0; i < e.inner; ++i) {
      const std::size_t base = o * e.length * e.inner + i;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < limit; ++j) mx = std::max(mx, xv[base + j * e.inner]);
      T total = 0;
      for (std::size_t j = 0; j < limit; ++j) {
        const T v = std::exp(xv[base + j * e.inner] - mx);
        y[base + j * e.inner] = v;
        total += v;
      }
      for (std::size_t j = 0; j < limit; ++j) y[base + j * e.inner] /= total;
    }
  }
  const std::size_t ix = x.id();
  return graph_of(x).make("softmax", std::move(y), {ix}, [ix, e](Graph<T>& g, std::size_t self) {
    const auto& gy = g.node(self).grad;
    const auto& yv = g.node(self).value;
    auto& gx = g.grad_buffer(ix);
    for (std::size_t o = 0; o < e.outer; ++o) {
      for (std::size_t i = 0; i < e.inner; ++i) {
        const std::size_t base = o * e.length * e.inner + i;
        T dot = 0;
        for (std::size_t j = 0; j < e.length; ++j) dot += yv[base + j * e.inner] * gy[base + j * e.inner];
        for (std::size_t j = 0; j < e.length; ++j) {
          const std::size_t p = base + j * e.inner;
          gx[p] += yv[p] * (gy[p] - dot);
        }
      }
    }
  });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> shift, std::size_t axis, T eps) {
  same_graph(x, gain);
  same_graph(x, shift);
  const Shape& xs = x.shape();
  const auto e = axis_extents(xs, axis);
  if (e.length < 2) throw ConfigError("layer_norm: normalized axis length must be >= 2");
  if (gain.value().size() != e.length || shift.value().size() != e.length) {
    throw DimensionError("layer_norm: gain/shift length must equal normalized axis length " +
                         std::to_string(e.length));
  }
  auto xhat = std::make_shared<Tensor<T>>(xs);
  auto rstd = std::make_shared<std::vector<T>>(e.outer * e.inner);
  Tensor<T> y(xs);
  const auto xv = x.value().data();
  const auto gv = gain.value().data();
  const auto sv = shift.value().data();
  const T inv_n = T(1) / static_cast<T>(e.length);
  for (std::size_t o = 0; o < e.outer; ++o) {
    for (std::size_t i = 0; i < e.inner; ++i) {
      const std::size_t base = o * e.length * e.inner + i;
      T mean = 0;
      for (std::size_t j = 0; j < e.length; ++j) mean += xv[base + j * e.inner];
      mean *= inv_n;
      T var = 0;
      for (std::size_t j = 0; j < e.length; ++j) {
        const T c = xv[base + j * e.inner] - mean;
        var += c * c;
      }
      var *= inv_n;
      const T r = T(1) / std::sqrt(var + eps);
      (*rstd)[o * e.inner + i] = r;
      for (std::size_t j = 0; j < e.length; ++j) {
        const std::size_t p = base + j * e.inner;
        const T h = (xv[p] - mean) * r;
        (*xhat)[p] = h;
        y[p] = h * gv[j] + sv[j];
      }
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), is = shift.id();
  return graph_of(x).make("layer_norm", std::move(y), {ix, ig, is},
                          [ix, ig, is, e, xhat, rstd, inv_n](Graph<T>& g, std::size_t self) {
    const auto& gy = g.node(self).grad;
    const auto& gv = g.node(ig).value;
    const bool need_x = g.node(ix).requires_grad;
    const bool need_g = g.node(ig).requires_grad;
    const bool need_s = g.node(is).requires_grad;
    T* dx = need_x ? g.grad_buffer(ix).data().data() : nullptr;
    T* dg = need_g ? g.grad_buffer(ig).data().data() : nullptr;
    T* ds = need_s ? g.grad_buffer(is).data().data() : nullptr;
    for (std::size_t o = 0; o < e.outer; ++o) {
      for (std::size_t i = 0; i < e.inner; ++i) {
        const std::size_t base = o * e.length * e.inner + i;
        T mean_d = 0, mean_dh = 0;
        for (std::size_t j = 0; j < e.length; ++j) {
          const std::size_t p = base + j * e.inner;
          const T dh = gy[p] * gv[j];
          mean_d += dh;
          mean_dh += dh * (*xhat)[p];
          if (dg) dg[j] += gy[p] * (*xhat)[p];
          if (ds) ds[j] += gy[p];
        }
        if (!dx) continue;
        mean_d *= inv_n;
        mean_dh *= inv_n;
        const T r = (*rstd)[o * e.inner + i];
        for (std::size_t j = 0; j < e.length; ++j) {
          const std::size_t p = base + j * e.inner;
          dx[p] += r * (gy[p] * gv[j] - mean_d - (*xhat)[p] * mean_dh);
        }
      }
    }
  });
}

template <typename T>
Var<T> slice(Var<T> x, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& xs = x.shape();
  const auto e = axis_extents(xs, axis);
  if (length == 0 || start + length > e.length) {
    throw DimensionError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") out of range for axis of length " + std::to_string(e.length));
  }
  Shape ys = xs;
  ys[axis] = length;
  Tensor<T> y(ys);
  const T* src = x.value().data().data();
  const std::size_t block = length * e.inner;
  for (std::size_t o = 0; o < e.outer; ++o) {
    std::copy_n(src + (o * e.length + start) * e.inner, block, y.data().data() + o * block);
  }
  const std::size_t ix = x.id();
  return graph_of(x).make("slice", std::move(y), {ix}, [ix, e, start, block](Graph<T>& g, std::size_t self) {
    const T* gy = g.node(self).grad.data().data();
    T* gx = g.grad_buffer(ix).data().data();
    for (std::size_t o = 0; o < e.outer; ++o) {
      T* dst = gx + (o * e.length + start) * e.inner;
      const T* s = gy + o * block;
      for (std::size_t i = 0; i < block; ++i) dst[i] += s[i];
    }
  });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw UsageError("concat of zero tensors");
  auto& graph = graph_of(parts.front());
  Shape ys = parts.front().shape();
  if (axis >= ys.size()) throw DimensionError("concat axis out of range");
  std::size_t total = 0;
  for (const auto& p : parts) {
    same_graph(parts.front(), p);
    Shape s = p.shape();
    if (s.size() != ys.size()) throw DimensionError("concat rank mismatch");
    total += s[axis];
    s[axis] = ys[axis];
    if (s != ys) throw DimensionError("concat: incompatible shape " + shape_str(p.shape()));
  }
  ys[axis] = total;
  const auto e = axis_extents(ys, axis);
  Tensor<T> y(ys);
  std::vector<std::size_t> ids, lengths;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t len = p.shape()[axis];
    const std::size_t block = len * e.inner;
    const T* src = p.value().data().data();
    for (std::size_t o = 0; o < e.outer; ++o) {
      std::copy_n(src + o * block, block, y.data().data() + (o * total + offset) * e.inner);
    }
    offset += len;
    ids.push_back(p.id());
    lengths.push_back(len);
  }
  return graph.make("concat", std::move(y), ids, [ids, lengths, e, total](Graph<T>& g, std::size_t self) {
    const T* gy = g.node(self).grad.data().data();
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t block = lengths[k] * e.inner;
      if (g.node(ids[k]).requires_grad) {
        T* gx = g.grad_buffer(ids[k]).data().data();
        for (std::size_t o = 0; o < e.outer; ++o) {
          const T* s = gy + (o * total + offset) * e.inner;
          T* dst = gx + o * block;
          for (std::size_t i = 0; i < block; ++i) dst[i] += s[i];
        }
      }
      offset += lengths[k];
    }
  });
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
  Tensor<T> y = x.value().reshaped(std::move(shape));
  const std::size_t ix = x.id();
  return graph_of(x).make("reshape", std::move(y), {ix}, [ix](Graph<T>& g, std::size_t self) {
    add_into(g.grad_buffer(ix), g.node(self).grad);
  });
}

template <typename T>
Var<T> permute(Var<T> x, const std::vector<std::size_t>& perm) {
  const Shape& xs = x.shape();
  const std::size_t r = xs.size();
  if (perm.size() != r) throw DimensionError("permute: permutation rank mismatch");
  std::vector<bool> seen(r, false);
  for (std::size_t p : perm) {
    if (p >= r || seen[p]) throw DimensionError("permute: invalid permutation");
    seen[p] = true;
  }
  Shape ys(r);
  for (std::size_t i = 0; i < r; ++i) ys[i] = xs[perm[i]];
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r - 1; i-- > 0;) in_stride[i] = in_stride[i + 1] * xs[i + 1];
  // Source offset for every output element, walked with an odometer.
  auto map = std::make_shared<std::vector<std::size_t>>(shape_size(ys));
  std::vector<std::size_t> idx(r, 0);
  std::size_t src = 0;
  for (std::size_t out = 0; out < map->size(); ++out) {
    (*map)[out] = src;
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      src += in_stride[perm[d]];
      if (idx[d] < ys[d]) break;
      src -= in_stride[perm[d]] * ys[d];
      idx[d] = 0;
    }
  }
  Tensor<T> y(ys);
  const auto xv = x.value().data();
  for (std::size_t i = 0; i < map->size(); ++i) y[i] = xv[(*map)[i]];
  const std::size_t ix = x.id();
  return graph_of(x).make("permute", std::move(y), {ix}, [ix, map](Graph<T>& g, std::size_t self) {
    const auto& gy = g.node(self).grad;
    auto& gx = g.grad_buffer(ix);
    for (std::size_t i = 0; i < map->size(); ++i) gx[(*map)[i]] += gy[i];
  });
}

template <typename T>
Var<T> sum(Var<T> x) {
  double total = 0;
  for (T v : x.value().data()) total += v;
  const std::size_t ix = x.id();
  return graph_of(x).make("sum", Tensor<T>::scalar(static_cast<T>(total)), {ix}, [ix](Graph<T>& g, std::size_t self) {
    const T gy = g.node(self).grad[0];
    for (auto& v : g.grad_buffer(ix).vec()) v += gy;
  });
}

template <typename T>
Var<T> sum_squares(Var<T> x) {
  double total = 0;
  for (T v : x.value().data()) total += static_cast<double>(v) * v;
  const std::size_t ix = x.id();
  return graph_of(x).make("sum_squares", Tensor<T>::scalar(static_cast<T>(total)), {ix}, [ix](Graph<T>& g, std::size_t self) {
    const T gy = g.node(self).grad[0];
    const auto& xv = g.node(ix).value;
    auto& gx = g.grad_buffer(ix);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += T(2) * gy * xv[i];
  });
}

template <typename T>
Var<T> batch_affine(Var<T> x, const std::vector<T>& scale_v, const std::vector<T>& shift_v) {
  const Shape& xs = x.shape();
  if (xs.empty() || scale_v.size() != xs[0] || shift_v.size() != xs[0]) {
    throw DimensionError("batch_affine: scale/shift length must equal leading dimension of " + shape_str(xs));
  }
  const std::size_t per = x.value().size() / xs[0];
  Tensor<T> y(xs);
  const auto xv = x.value().data();
  for (std::size_t b = 0; b < xs[0]; ++b) {
    for (std::size_t i = 0; i < per; ++i) y[b * per + i] = xv[b * per + i] * scale_v[b] + shift_v[b];
  }
  const std::size_t ix = x.id();
  return graph_of(x).make("batch_affine", std::move(y), {ix}, [ix, scale_v, per](Graph<T>& g, std::size_t self) {
    const auto& gy = g.node(self).grad;
    auto& gx = g.grad_buffer(ix);
    for (std::size_t b = 0; b < scale_v.size(); ++b) {
      for (std::size_t i = 0; i < per; ++i) gx[b * per + i] += gy[b * per + i] * scale_v[b];
    }
  });
}

#define ISAC_INSTANTIATE_OPS(T)                                                                  \
  template Var<T> add<T>(Var<T>, Var<T>);                                                        \
  template Var<T> sub<T>(Var<T>, Var<T>);                                                        \
  template Var<T> mul<T>(Var<T>, Var<T>);                                                        \
  template Var<T> scale<T>(Var<T>, T);                                                           \
  template Var<T> sigmoid<T>(Var<T>);                                                            \
  template Var<T> tanh<T>(Var<T>);                                                               \
  template Var<T> gelu<T>(Var<T>);                                                               \
  template Var<T> matmul<T>(Var<T>, Var<T>, bool);                                               \
  template Var<T> linear<T>(Var<T>, Var<T>, Var<T>);                                             \
  template Var<T> conv2d<T>(Var<T>, Var<T>, Var<T>);                                             \
  template Var<T> softmax<T>(Var<T>, std::size_t, bool);                                         \
  template Var<T> layer_norm<T>(Var<T>, Var<T>, Var<T>, std::size_t, T);                         \
  template Var<T> slice<T>(Var<T>, std::size_t, std::size_t, std::size_t);                       \
  template Var<T> concat<T>(const std::vector<Var<T>>&, std::size_t);                            \
  template Var<T> reshape<T>(Var<T>, Shape);                                                     \
  template Var<T> permute<T>(Var<T>, const std::vector<std::size_t>&);                           \
  template Var<T> sum<T>(Var<T>);                                                                \
  template Var<T> sum_squares<T>(Var<T>);                                                        \
  template Var<T> batch_affine<T>(Var<T>, const std::vector<T>&, const std::vector<T>&);

ISAC_INSTANTIATE_OPS(float)
ISAC_INSTANTIATE_OPS(double)

}  // namespace isac::num
