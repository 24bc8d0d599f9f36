/*
 * Copyright 2026 The MHKA Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "mhka/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mhka::kernels {
namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 16;

using Index = std::ptrdiff_t;

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_max_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

namespace {

// C[i0:i0+R, j0:j0+C] (+)= A B for one register tile. A is addressed through
// strides so the same tile serves A and A^T.
template <typename T, std::size_t R, std::size_t C>
void tile(std::size_t k, std::size_t n, const T* a, std::size_t ars, std::size_t acs,
          const T* b, T* c, std::size_t i0, std::size_t j0, bool accumulate) {
  T acc[R][C];
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t j = 0; j < C; ++j) {
      acc[r][j] = accumulate ? c[(i0 + r) * n + j0 + j] : T(0);
    }
  }
  for (std::size_t p = 0; p < k; ++p) {
    const T* bp = b + p * n + j0;
    for (std::size_t r = 0; r < R; ++r) {
      const T av = a[(i0 + r) * ars + p * acs];
      for (std::size_t j = 0; j < C; ++j) acc[r][j] += av * bp[j];
    }
  }
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t j = 0; j < C; ++j) c[(i0 + r) * n + j0 + j] = acc[r][j];
  }
}

// Ragged edge: one row, any width.
template <typename T>
void edge(std::size_t k, std::size_t n, const T* a, std::size_t ars, std::size_t acs,
          const T* b, T* c, std::size_t i, std::size_t j0, std::size_t width,
          bool accumulate) {
  T* crow = c + i * n + j0;
  if (!accumulate) std::fill(crow, crow + width, T(0));
  for (std::size_t p = 0; p < k; ++p) {
    const T av = a[i * ars + p * acs];
    const T* bp = b + p * n + j0;
    for (std::size_t j = 0; j < width; ++j) crow[j] += av * bp[j];
  }
}

template <typename T>
void strided_gemm(std::size_t m, std::size_t k, std::size_t n, const T* a,
                  std::size_t ars, std::size_t acs, const T* b, T* c, bool accumulate) {
  constexpr std::size_t R = 4, C = 32;
  const std::size_t row_blocks = (m + R - 1) / R;
  const bool parallel = m * k * n >= kParallelWork && row_blocks > 1;
#pragma omp parallel for schedule(static) if (parallel)
  for (Index blk = 0; blk < static_cast<Index>(row_blocks); ++blk) {
    const std::size_t i0 = static_cast<std::size_t>(blk) * R;
    const std::size_t rows = std::min(R, m - i0);
    std::size_t j0 = 0;
    for (; j0 + C <= n; j0 += C) {
      if (rows == R) {
        tile<T, R, C>(k, n, a, ars, acs, b, c, i0, j0, accumulate);
      } else {
        for (std::size_t r = 0; r < rows; ++r) {
          tile<T, 1, C>(k, n, a, ars, acs, b, c, i0 + r, j0, accumulate);
        }
      }
    }
    if (j0 < n) {
      for (std::size_t r = 0; r < rows; ++r) {
        edge(k, n, a, ars, acs, b, c, i0 + r, j0, n - j0, accumulate);
      }
    }
  }
}

}  // namespace

template <typename T>
void gemm(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b,
          T* c, bool accumulate) {
  strided_gemm(m, k, n, a, k, 1, b, c, accumulate);
}

template <typename T>
void gemm_at_b(std::size_t m, std::size_t k, std::size_t n, const T* a,
               const T* b, T* c) {
  strided_gemm(m, k, n, a, 1, m, b, c, /*accumulate=*/true);
}

template <typename T>
void gemm_a_bt(std::size_t m, std::size_t k, std::size_t n, const T* a,
               const T* b, T* c) {
  // Transposing b turns the dot-product loop into a contiguous axpy loop.
  std::vector<T> bt(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  gemm(m, k, n, a, bt.data(), c, /*accumulate=*/true);
}

template <typename T>
void softmax_rows(std::size_t rows, std::size_t cols, const T* x, T* out) {
  const bool parallel = rows * cols >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (Index r = 0; r < static_cast<Index>(rows); ++r) {
    const T* xr = x + r * cols;
    T* yr = out + r * cols;
    const T mx = *std::max_element(xr, xr + cols);
    T sum = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      sum += yr[j];
    }
    const T inv = T(1) / sum;
    for (std::size_t j = 0; j < cols; ++j) yr[j] *= inv;
  }
}

template <typename T>
void attention_forward(std::size_t nq, std::size_t nk, std::size_t d,
                       std::size_t heads, bool causal, const T* q, const T* k,
                       const T* v, T* out, T* weights) {
  const std::size_t dz = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dz));
  const bool parallel = heads > 1 && nq * nk * d >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (Index h = 0; h < static_cast<Index>(heads); ++h) {
    const std::size_t off = h * dz;
    for (std::size_t i = 0; i < nq; ++i) {
      T* w = weights + (h * nq + i) * nk;
      const std::size_t visible = causal ? std::min(i + 1, nk) : nk;
      const T* qi = q + i * d + off;
      T mx = -INFINITY;
      for (std::size_t j = 0; j < visible; ++j) {
        const T* kj = k + j * d + off;
        T s = 0;
        for (std::size_t c = 0; c < dz; ++c) s += qi[c] * kj[c];
        w[j] = s * scale;
        mx = std::max(mx, w[j]);
      }
      T sum = 0;
      for (std::size_t j = 0; j < visible; ++j) {
        w[j] = std::exp(w[j] - mx);
        sum += w[j];
      }
      const T inv = T(1) / sum;
      for (std::size_t j = 0; j < visible; ++j) w[j] *= inv;
      for (std::size_t j = visible; j < nk; ++j) w[j] = 0;

      T* oi = out + i * d + off;
      std::fill(oi, oi + dz, T(0));
      for (std::size_t j = 0; j < visible; ++j) {
        const T wj = w[j];
        const T* vj = v + j * d + off;
        for (std::size_t c = 0; c < dz; ++c) oi[c] += wj * vj[c];
      }
    }
  }
}

template <typename T>
void attention_backward(std::size_t nq, std::size_t nk, std::size_t d,
                        std::size_t heads, const T* q, const T* k, const T* v,
                        const T* weights, const T* dout, T* dq, T* dk, T* dv) {
  const std::size_t dz = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dz));
  const bool parallel = heads > 1 && nq * nk * d >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (Index h = 0; h < static_cast<Index>(heads); ++h) {
    const std::size_t off = h * dz;
    std::vector<T> dscore(nk);
    for (std::size_t i = 0; i < nq; ++i) {
      const T* w = weights + (h * nq + i) * nk;
      const T* doi = dout + i * d + off;
      T dot = 0;
      for (std::size_t j = 0; j < nk; ++j) {
        const T* vj = v + j * d + off;
        T g = 0;
        for (std::size_t c = 0; c < dz; ++c) g += doi[c] * vj[c];
        dscore[j] = g;
        dot += g * w[j];
      }
      for (std::size_t j = 0; j < nk; ++j) {
        dscore[j] = w[j] * (dscore[j] - dot) * scale;
      }
      const T* qi = q + i * d + off;
      for (std::size_t j = 0; j < nk; ++j) {
        const T wj = w[j];
        const T ds = dscore[j];
        if (wj == T(0) && ds == T(0)) continue;
        if (dv) {
          T* dvj = dv + j * d + off;
          for (std::size_t c = 0; c < dz; ++c) dvj[c] += wj * doi[c];
        }
        if (dq) {
          T* dqi = dq + i * d + off;
          const T* kj = k + j * d + off;
          for (std::size_t c = 0; c < dz; ++c) dqi[c] += ds * kj[c];
        }
        if (dk) {
          T* dkj = dk + j * d + off;
          for (std::size_t c = 0; c < dz; ++c) dkj[c] += ds * qi[c];
        }
      }
    }
  }
}

namespace reference {

template <typename T>
void gemm(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b,
          T* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T s = accumulate ? c[i * n + j] : T(0);
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  }
}

template <typename T>
void softmax_rows(std::size_t rows, std::size_t cols, const T* x, T* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    T mx = x[r * cols];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[r * cols + j]);
    T sum = 0;
    for (std::size_t j = 0; j < cols; ++j) sum += std::exp(x[r * cols + j] - mx);
    for (std::size_t j = 0; j < cols; ++j) {
      out[r * cols + j] = std::exp(x[r * cols + j] - mx) / sum;
    }
  }
}

template <typename T>
void attention_forward(std::size_t nq, std::size_t nk, std::size_t d,
                       std::size_t heads, bool causal, const T* q, const T* k,
                       const T* v, T* out, T* weights) {
  const std::size_t dz = d / heads;
  const T scale = std::sqrt(static_cast<T>(dz));
  std::vector<T> logits(nk);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < nq; ++i) {
      const std::size_t visible = causal ? std::min(i + 1, nk) : nk;
      for (std::size_t j = 0; j < visible; ++j) {
        T s = 0;
        for (std::size_t c = 0; c < dz; ++c) {
          s += q[i * d + h * dz + c] * k[j * d + h * dz + c];
        }
        logits[j] = s / scale;
      }
      T* w = weights + (h * nq + i) * nk;
      softmax_rows<T>(1, visible, logits.data(), w);
      for (std::size_t j = visible; j < nk; ++j) w[j] = 0;
      for (std::size_t c = 0; c < dz; ++c) {
        T s = 0;
        for (std::size_t j = 0; j < nk; ++j) s += w[j] * v[j * d + h * dz + c];
        out[i * d + h * dz + c] = s;
      }
    }
  }
}

template <typename T>
void attention_backward(std::size_t nq, std::size_t nk, std::size_t d,
                        std::size_t heads, const T* q, const T* k, const T* v,
                        const T* weights, const T* dout, T* dq, T* dk, T* dv) {
  const std::size_t dz = d / heads;
  const T scale = std::sqrt(static_cast<T>(dz));
  for (std::size_t h = 0; h < heads; ++h) {
    // dW = dO V^T, then the softmax Jacobian row by row.
    std::vector<T> dw(nq * nk, T(0)), ds(nq * nk, T(0));
    for (std::size_t i = 0; i < nq; ++i) {
      for (std::size_t j = 0; j < nk; ++j) {
        for (std::size_t c = 0; c < dz; ++c) {
          dw[i * nk + j] += dout[i * d + h * dz + c] * v[j * d + h * dz + c];
        }
      }
    }
    for (std::size_t i = 0; i < nq; ++i) {
      const T* w = weights + (h * nq + i) * nk;
      for (std::size_t j = 0; j < nk; ++j) {
        T acc = 0;
        for (std::size_t l = 0; l < nk; ++l) {
          const T jac = (j == l ? w[j] : T(0)) - w[j] * w[l];
          acc += jac * dw[i * nk + l];
        }
        ds[i * nk + j] = acc / scale;
      }
    }
    for (std::size_t i = 0; i < nq; ++i) {
      const T* w = weights + (h * nq + i) * nk;
      for (std::size_t j = 0; j < nk; ++j) {
        for (std::size_t c = 0; c < dz; ++c) {
          if (dv) dv[j * d + h * dz + c] += w[j] * dout[i * d + h * dz + c];
          if (dq) dq[i * d + h * dz + c] += ds[i * nk + j] * k[j * d + h * dz + c];
          if (dk) dk[j * d + h * dz + c] += ds[i * nk + j] * q[i * d + h * dz + c];
        }
      }
    }
  }
}

}  // namespace reference

#define MHKA_INSTANTIATE_KERNELS(T)                                            \
  template void gemm<T>(std::size_t, std::size_t, std::size_t, const T*,       \
                        const T*, T*, bool);                                   \
  template void gemm_at_b<T>(std::size_t, std::size_t, std::size_t, const T*,  \
                             const T*, T*);                                    \
  template void gemm_a_bt<T>(std::size_t, std::size_t, std::size_t, const T*,  \
                             const T*, T*);                                    \
  template void softmax_rows<T>(std::size_t, std::size_t, const T*, T*);       \
  template void attention_forward<T>(std::size_t, std::size_t, std::size_t,    \
                                     std::size_t, bool, const T*, const T*,    \
                                     const T*, T*, T*);                        \
  template void attention_backward<T>(                                         \
      std::size_t, std::size_t, std::size_t, std::size_t, const T*, const T*,  \
      const T*, const T*, const T*, T*, T*, T*);                               \
  template void reference::gemm<T>(std::size_t, std::size_t, std::size_t,      \
                                   const T*, const T*, T*, bool);              \
  template void reference::softmax_rows<T>(std::size_t, std::size_t, const T*, \
                                           T*);                                \
  template void reference::attention_forward<T>(                               \
      std::size_t, std::size_t, std::size_t, std::size_t, bool, const T*,      \
      const T*, const T*, T*, T*);                                             \
  template void reference::attention_backward<T>(                              \
      std::size_t, std::size_t, std::size_t, std::size_t, const T*, const T*,  \
      const T*, const T*, const T*, T*, T*, T*);

MHKA_INSTANTIATE_KERNELS(float)
MHKA_INSTANTIATE_KERNELS(double)

#undef MHKA_INSTANTIATE_KERNELS

}  // namespace mhka::kernels
