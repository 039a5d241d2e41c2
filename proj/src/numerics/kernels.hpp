// SPDX-License-Identifier: Apache-2.0
// Raw accumulate-into kernels behind the autodiff ops. All matrices row-major.
#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace isac::num::kernels {

// C[m x n] += A * B[k x n] where A(i, p) = A[i * rs + p * cs]. Register-blocked
// 4 x 16 tiles; each output sums over p in order, so results are reproducible.
template <typename T>
void gemm_strided_a(const T* A, std::size_t rs, std::size_t cs, const T* B, T* C, std::size_t m, std::size_t k,
                    std::size_t n) {
  constexpr std::size_t MR = 4, NR = 16;
  std::size_t i0 = 0;
  std::vector<T> panel(MR * k);  // 4 rows of A packed as [p][r]
  for (; i0 + MR <= m; i0 += MR) {
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t r = 0; r < MR; ++r) panel[p * MR + r] = A[(i0 + r) * rs + p * cs];
    std::size_t j0 = 0;
    for (; j0 + NR <= n; j0 += NR) {
      T acc0[NR] = {}, acc1[NR] = {}, acc2[NR] = {}, acc3[NR] = {};
      for (std::size_t p = 0; p < k; ++p) {
        const T* __restrict b = B + p * n + j0;
        const T* a = panel.data() + p * MR;
        const T a0 = a[0], a1 = a[1], a2 = a[2], a3 = a[3];
        for (std::size_t j = 0; j < NR; ++j) {
          acc0[j] += a0 * b[j];
          acc1[j] += a1 * b[j];
          acc2[j] += a2 * b[j];
          acc3[j] += a3 * b[j];
        }
      }
      T* c = C + i0 * n + j0;
      for (std::size_t j = 0; j < NR; ++j) {
        c[j] += acc0[j];
        c[n + j] += acc1[j];
        c[2 * n + j] += acc2[j];
        c[3 * n + j] += acc3[j];
      }
    }
    for (std::size_t i = i0; i < i0 + MR; ++i)
      for (std::size_t j = j0; j < n; ++j) {
        T acc = 0;
        for (std::size_t p = 0; p < k; ++p) acc += A[i * rs + p * cs] * B[p * n + j];
        C[i * n + j] += acc;
      }
  }
  for (std::size_t i = i0; i < m; ++i) {
    T* c = C + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = A[i * rs + p * cs];
      const T* b = B + p * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

/// C[m x n] += A[m x k] * B[k x n]
template <typename T>
void gemm_nn(const T* A, const T* B, T* C, std::size_t m, std::size_t k, std::size_t n) {
  gemm_strided_a(A, k, 1, B, C, m, k, n);
}

/// C[m x n] += A[m x k] * B^T, B stored [n x k]
template <typename T>
void gemm_nt(const T* A, const T* B, T* C, std::size_t m, std::size_t k, std::size_t n) {
  if (m >= 4 && n >= 16) {
    std::vector<T> bt(k * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = B[j * k + p];
    gemm_strided_a(A, k, 1, bt.data(), C, m, k, n);
    return;
  }
  for (std::size_t i = 0; i < m; ++i) {
    const T* a = A + i * k;
    T* c = C + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const T* b = B + j * k;
      T acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += a[p] * b[p];
      c[j] += acc;
    }
  }
}

/// C[m x n] += A^T * B, A stored [k x m], B stored [k x n]
template <typename T>
void gemm_tn(const T* A, const T* B, T* C, std::size_t k, std::size_t m, std::size_t n) {
  gemm_strided_a(A, 1, m, B, C, m, k, n);
}

struct ConvDims {
  std::size_t batch, cin, h, w, cout, kh, kw;
};

// Calls fn(out_offset, in_offset, run_length) for every contiguous run of output
// pixels whose tap (dh, dw) lands inside the input plane.
template <typename Fn>
void for_each_tap_run(const ConvDims& d, std::size_t dh, std::size_t dw, Fn&& fn) {
  const long ph = static_cast<long>(d.kh / 2);
  const long pw = static_cast<long>(d.kw / 2);
  const long sh = static_cast<long>(dh) - ph;
  const long sw = static_cast<long>(dw) - pw;
  const long H = static_cast<long>(d.h);
  const long W = static_cast<long>(d.w);
  const long h0 = std::max(0L, -sh), h1 = std::min(H, H - sh);
  const long w0 = std::max(0L, -sw), w1 = std::min(W, W - sw);
  if (h0 >= h1 || w0 >= w1) return;
  if (sw == 0) {
    fn(static_cast<std::size_t>(h0 * W), static_cast<std::size_t>((h0 + sh) * W),
       static_cast<std::size_t>((h1 - h0) * W));
    return;
  }
  for (long h = h0; h < h1; ++h) {
    fn(static_cast<std::size_t>(h * W + w0), static_cast<std::size_t>((h + sh) * W + w0 + sw),
       static_cast<std::size_t>(w1 - w0));
  }
}

// Patch matrix col[(ci, dh, dw), (b, pixel)] with zero padding. Rows = cin*kh*kw,
// columns = batch*h*w.
template <typename T>
void im2col(const T* x, T* col, const ConvDims& d) {
  const std::size_t plane = d.h * d.w, cols = d.batch * plane;
  for (std::size_t ci = 0; ci < d.cin; ++ci)
    for (std::size_t dh = 0; dh < d.kh; ++dh)
      for (std::size_t dw = 0; dw < d.kw; ++dw) {
        T* row = col + ((ci * d.kh + dh) * d.kw + dw) * cols;
        for (std::size_t b = 0; b < d.batch; ++b) {
          const T* xp = x + (b * d.cin + ci) * plane;
          T* rp = row + b * plane;
          for_each_tap_run(d, dh, dw, [&](std::size_t yo, std::size_t xo, std::size_t n) {
            std::copy_n(xp + xo, n, rp + yo);
          });
        }
      }
}

template <typename T>
void col2im_add(const T* col, T* dx, const ConvDims& d) {
  const std::size_t plane = d.h * d.w, cols = d.batch * plane;
  for (std::size_t ci = 0; ci < d.cin; ++ci)
    for (std::size_t dh = 0; dh < d.kh; ++dh)
      for (std::size_t dw = 0; dw < d.kw; ++dw) {
        const T* row = col + ((ci * d.kh + dh) * d.kw + dw) * cols;
        for (std::size_t b = 0; b < d.batch; ++b) {
          T* xp = dx + (b * d.cin + ci) * plane;
          const T* rp = row + b * plane;
          for_each_tap_run(d, dh, dw, [&](std::size_t yo, std::size_t xo, std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) xp[xo + i] += rp[yo + i];
          });
        }
      }
}

// x [batch, cin, h, w], k [cout, cin, kh, kw], y [batch, cout, h, w]; 'same' zero padding.
template <typename T>
void conv2d_forward(const T* x, const T* k, const T* bias, T* y, const ConvDims& d) {
  const std::size_t plane = d.h * d.w, cols = d.batch * plane, ck = d.cin * d.kh * d.kw;
  std::vector<T> col(ck * cols, T(0));
  std::vector<T> out(d.cout * cols, T(0));
  im2col(x, col.data(), d);
  gemm_nn(k, col.data(), out.data(), d.cout, ck, cols);
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t co = 0; co < d.cout; ++co) {
      T* yp = y + (b * d.cout + co) * plane;
      const T* op = out.data() + co * cols + b * plane;
      const T bv = bias ? bias[co] : T(0);
      for (std::size_t i = 0; i < plane; ++i) yp[i] += op[i] + bv;
    }
}

template <typename T>
void conv2d_backward(const T* x, const T* k, const T* dy, T* dx, T* dk, T* dbias, const ConvDims& d) {
  const std::size_t plane = d.h * d.w, cols = d.batch * plane, ck = d.cin * d.kh * d.kw;
  std::vector<T> g(d.cout * cols);  // dy as [cout, (b, pixel)]
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t co = 0; co < d.cout; ++co)
      std::copy_n(dy + (b * d.cout + co) * plane, plane, g.data() + co * cols + b * plane);
  if (dbias) {
    for (std::size_t co = 0; co < d.cout; ++co) {
      T s = 0;
      for (std::size_t i = 0; i < cols; ++i) s += g[co * cols + i];
      dbias[co] += s;
    }
  }
  if (dk) {
    std::vector<T> col(ck * cols, T(0));
    im2col(x, col.data(), d);
    // transpose so the reduction over (b, pixel) runs as an outer loop
    std::vector<T> col_t(cols * ck);
    for (std::size_t r = 0; r < ck; ++r)
      for (std::size_t c = 0; c < cols; ++c) col_t[c * ck + r] = col[r * cols + c];
    gemm_nn(g.data(), col_t.data(), dk, d.cout, cols, ck);
  }
  if (dx) {
    std::vector<T> dcol(ck * cols, T(0));
    gemm_tn(k, g.data(), dcol.data(), d.cout, ck, cols);
    col2im_add(dcol.data(), dx, d);
  }
}

}  // namespace isac::num::kernels
