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

// Raw numeric kernels behind the autograd ops.
//
// The top-level namespace holds the OpenMP-parallel versions used by the
// library. mhka::kernels::reference holds straightforward serial versions of
// the same contracts; they are kept for tests and for the benchmark target.
// Every parallel kernel partitions its output so that each element is
// produced by exactly one thread in a fixed summation order, which keeps
// results bit-identical for any thread count.
//
// All buffers are dense row-major.

#pragma once

#include <cstddef>

namespace mhka::kernels {

// c[m x n] (+)= a[m x k] * b[k x n]
template <typename T>
void gemm(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b,
          T* c, bool accumulate);

// c[m x n] += a^T * b with a[k x m], b[k x n]
template <typename T>
void gemm_at_b(std::size_t m, std::size_t k, std::size_t n, const T* a,
               const T* b, T* c);

// c[m x n] += a * b^T with a[m x k], b[n x k]
template <typename T>
void gemm_a_bt(std::size_t m, std::size_t k, std::size_t n, const T* a,
               const T* b, T* c);

// Row-wise softmax over `cols`, max-subtracted.
template <typename T>
void softmax_rows(std::size_t rows, std::size_t cols, const T* x, T* out);

// Multi-head scaled dot-product attention over already-projected inputs.
//   q: [nq x d], k, v: [nk x d], d = heads * dz
//   out: [nq x d] (heads concatenated), weights: [heads x nq x nk]
// With `causal`, query i only sees keys j <= i (requires nq == nk).
template <typename T>
void attention_forward(std::size_t nq, std::size_t nk, std::size_t d,
                       std::size_t heads, bool causal, const T* q, const T* k,
                       const T* v, T* out, T* weights);

// Accumulates gradients into dq, dk, dv (any of which may be null).
template <typename T>
void attention_backward(std::size_t nq, std::size_t nk, std::size_t d,
                        std::size_t heads, const T* q, const T* k, const T* v,
                        const T* weights, const T* dout, T* dq, T* dk, T* dv);

namespace reference {

template <typename T>
void gemm(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b,
          T* c, bool accumulate);

template <typename T>
void softmax_rows(std::size_t rows, std::size_t cols, const T* x, T* out);

template <typename T>
void attention_forward(std::size_t nq, std::size_t nk, std::size_t d,
                       std::size_t heads, bool causal, const T* q, const T* k,
                       const T* v, T* out, T* weights);

template <typename T>
void attention_backward(std::size_t nq, std::size_t nk, std::size_t d,
                        std::size_t heads, const T* q, const T* k, const T* v,
                        const T* weights, const T* dout, T* dq, T* dk, T* dv);

}  // namespace reference

// Number of OpenMP threads the parallel kernels may use (1 without OpenMP).
int max_threads();
void set_max_threads(int n);

}  // namespace mhka::kernels
