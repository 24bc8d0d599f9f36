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

#include "mhka/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mhka/kernels.hpp"

namespace mhka {
namespace {

template <typename T>
void require_matrix(const Tensor<T>& t, const char* what) {
  if (t.rank() != 2) {
    fail(ErrorKind::kDimension, std::string(what) + " expects a matrix, got " +
                                    shape_to_string(t.shape()));
  }
}

template <typename T>
void axpy(std::span<T> dst, std::span<const T> src, T factor = T(1)) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * src[i];
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)

}  // namespace

template <typename T>
Graph<T>::Graph(bool training, std::uint64_t seed)
    : training_(training), rng_(seed) {
  nodes_.reserve(256);
}

template <typename T>
void Graph<T>::check(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    fail(ErrorKind::kContract, "variable does not belong to this graph");
  }
}

template <typename T>
const Tensor<T>& Graph<T>::val(int id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

template <typename T>
const Tensor<T>& Graph<T>::value(Var v) const {
  check(v);
  return val(v.id);
}

template <typename T>
Tensor<T>& Graph<T>::grad_ref(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor<T>(val(id).shape());
  return n.grad;
}

template <typename T>
Tensor<T> Graph<T>::grad(Var v) const {
  check(v);
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) return Tensor<T>(val(v.id).shape());
  return n.grad;
}

template <typename T>
Var Graph<T>::push(OpKind op, Tensor<T> value, std::vector<int> inputs,
                   std::function<void(Graph&, int)> backward) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  for (int id : n.inputs) n.requires_grad = n.requires_grad || needs_grad(id);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
Var Graph<T>::constant(Tensor<T> value) {
  return push(OpKind::kConstant, std::move(value), {}, nullptr);
}

template <typename T>
Var Graph<T>::input(Tensor<T> value, bool requires_grad) {
  Var v = push(OpKind::kInput, std::move(value), {}, nullptr);
  nodes_[v.id].requires_grad = requires_grad;
  return v;
}

template <typename T>
Var Graph<T>::param(const ParameterStore<T>& store, std::size_t index) {
  if (auto it = param_nodes_.find(index); it != param_nodes_.end()) {
    return Var{it->second};
  }
  Node n;
  n.op = OpKind::kParameter;
  n.external = &store[index].value;
  n.param_index = static_cast<long>(index);
  n.requires_grad = store[index].requires_grad;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size() - 1);
  param_nodes_.emplace(index, id);
  return Var{id};
}

template <typename T>
Var Graph<T>::matmul(Var a, Var b) {
  check(a);
  check(b);
  const Tensor<T>& A = val(a.id);
  const Tensor<T>& B = val(b.id);
  if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0)) {
    fail(ErrorKind::kDimension, "matmul of " + shape_to_string(A.shape()) +
                                    " and " + shape_to_string(B.shape()));
  }
  const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  Tensor<T> out({m, n});
  kernels::gemm(m, k, n, A.data(), B.data(), out.data(), false);
  return push(OpKind::kMatmul, std::move(out), {a.id, b.id},
              [m, k, n](Graph& g, int self) {
                const int ia = g.node(self).inputs[0];
                const int ib = g.node(self).inputs[1];
                const Tensor<T>& dC = g.node(self).grad;
                if (g.needs_grad(ia)) {
                  kernels::gemm_a_bt(m, n, k, dC.data(), g.val(ib).data(),
                                     g.grad_ref(ia).data());
                }
                if (g.needs_grad(ib)) {
                  kernels::gemm_at_b(k, m, n, g.val(ia).data(), dC.data(),
                                     g.grad_ref(ib).data());
                }
              });
}

template <typename T>
Var Graph<T>::add(Var a, Var b) {
  check(a);
  check(b);
  const Tensor<T>& A = val(a.id);
  const Tensor<T>& B = val(b.id);
  if (A.shape() != B.shape()) {
    fail(ErrorKind::kDimension, "add of " + shape_to_string(A.shape()) +
                                    " and " + shape_to_string(B.shape()));
  }
  Tensor<T> out = A;
  axpy<T>(out.values(), B.values());
  return push(OpKind::kAdd, std::move(out), {a.id, b.id},
              [](Graph& g, int self) {
                for (int in : g.node(self).inputs) {
                  if (g.needs_grad(in)) {
                    axpy<T>(g.grad_ref(in).values(),
                            g.node(self).grad.values());
                  }
                }
              });
}

template <typename T>
Var Graph<T>::add_row(Var a, Var row) {
  check(a);
  check(row);
  const Tensor<T>& A = val(a.id);
  const Tensor<T>& R = val(row.id);
  if (R.size() != A.cols()) {
    fail(ErrorKind::kDimension, "add_row of " + shape_to_string(A.shape()) +
                                    " and " + shape_to_string(R.shape()));
  }
  Tensor<T> out = A;
  for (std::size_t r = 0; r < out.rows(); ++r) axpy<T>(out.row(r), R.values());
  return push(OpKind::kAddRow, std::move(out), {a.id, row.id},
              [](Graph& g, int self) {
                const int ia = g.node(self).inputs[0];
                const int ir = g.node(self).inputs[1];
                const Tensor<T>& dY = g.node(self).grad;
                if (g.needs_grad(ia)) axpy<T>(g.grad_ref(ia).values(), dY.values());
                if (g.needs_grad(ir)) {
                  auto dr = g.grad_ref(ir).values();
                  for (std::size_t r = 0; r < dY.rows(); ++r) {
                    axpy<T>(dr, dY.row(r));
                  }
                }
              });
}

template <typename T>
Var Graph<T>::mul(Var a, Var b) {
  check(a);
  check(b);
  const Tensor<T>& A = val(a.id);
  const Tensor<T>& B = val(b.id);
  if (A.shape() != B.shape()) {
    fail(ErrorKind::kDimension, "mul of " + shape_to_string(A.shape()) +
                                    " and " + shape_to_string(B.shape()));
  }
  Tensor<T> out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  return push(OpKind::kMul, std::move(out), {a.id, b.id},
              [](Graph& g, int self) {
                const int ia = g.node(self).inputs[0];
                const int ib = g.node(self).inputs[1];
                const Tensor<T>& dY = g.node(self).grad;
                if (g.needs_grad(ia)) {
                  Tensor<T>& da = g.grad_ref(ia);
                  const Tensor<T>& B = g.val(ib);
                  for (std::size_t i = 0; i < dY.size(); ++i) da[i] += dY[i] * B[i];
                }
                if (g.needs_grad(ib)) {
                  Tensor<T>& db = g.grad_ref(ib);
                  const Tensor<T>& A = g.val(ia);
                  for (std::size_t i = 0; i < dY.size(); ++i) db[i] += dY[i] * A[i];
                }
              });
}

template <typename T>
Var Graph<T>::scale(Var a, T factor) {
  check(a);
  Tensor<T> out = val(a.id);
  for (auto& x : out.values()) x *= factor;
  return push(OpKind::kScale, std::move(out), {a.id},
              [factor](Graph& g, int self) {
                axpy<T>(g.grad_ref(g.node(self).inputs[0]).values(),
                        g.node(self).grad.values(), factor);
              });
}

template <typename T>
Var Graph<T>::sum(Var a) {
  check(a);
  const Tensor<T>& A = val(a.id);
  T s = std::accumulate(A.values().begin(), A.values().end(), T(0));
  return push(OpKind::kSum, Tensor<T>::scalar(s), {a.id},
              [](Graph& g, int self) {
                const T d = g.node(self).grad[0];
                for (auto& x : g.grad_ref(g.node(self).inputs[0]).values()) x += d;
              });
}

template <typename T>
Var Graph<T>::gelu(Var a) {
  check(a);
  Tensor<T> out = val(a.id);
  for (auto& x : out.values()) {
    const T u = static_cast<T>(kGeluC) * (x + T(0.044715) * x * x * x);
    x = T(0.5) * x * (T(1) + std::tanh(u));
  }
  return push(OpKind::kGelu, std::move(out), {a.id}, [](Graph& g, int self) {
    const int ia = g.node(self).inputs[0];
    const Tensor<T>& X = g.val(ia);
    const Tensor<T>& dY = g.node(self).grad;
    Tensor<T>& dX = g.grad_ref(ia);
    for (std::size_t i = 0; i < X.size(); ++i) {
      const T x = X[i];
      const T u = static_cast<T>(kGeluC) * (x + T(0.044715) * x * x * x);
      const T th = std::tanh(u);
      const T du = static_cast<T>(kGeluC) * (T(1) + T(3 * 0.044715) * x * x);
      const T d = T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * du;
      dX[i] += dY[i] * d;
    }
  });
}

template <typename T>
Var Graph<T>::softmax(Var a, int axis) {
  check(a);
  const Tensor<T>& A = val(a.id);
  const int rank = static_cast<int>(A.rank());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    fail(ErrorKind::kDimension, "softmax axis " + std::to_string(axis) +
                                    " invalid for shape " +
                                    shape_to_string(A.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= A.dim(i);
  for (int i = axis + 1; i < rank; ++i) inner *= A.dim(i);
  const std::size_t extent = A.dim(axis);

  Tensor<T> out(A.shape());
  if (inner == 1) {
    kernels::softmax_rows(outer, extent, A.data(), out.data());
  } else {
    std::vector<T> slice(extent), res(extent);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        for (std::size_t e = 0; e < extent; ++e) {
          slice[e] = A[(o * extent + e) * inner + in];
        }
        kernels::softmax_rows<T>(1, extent, slice.data(), res.data());
        for (std::size_t e = 0; e < extent; ++e) {
          out[(o * extent + e) * inner + in] = res[e];
        }
      }
    }
  }
  return push(OpKind::kSoftmax, std::move(out), {a.id},
              [outer, inner, extent](Graph& g, int self) {
                const Tensor<T>& Y = g.node(self).value;
                const Tensor<T>& dY = g.node(self).grad;
                Tensor<T>& dX = g.grad_ref(g.node(self).inputs[0]);
                for (std::size_t o = 0; o < outer; ++o) {
                  for (std::size_t in = 0; in < inner; ++in) {
                    T dot = 0;
                    for (std::size_t e = 0; e < extent; ++e) {
                      const std::size_t i = (o * extent + e) * inner + in;
                      dot += dY[i] * Y[i];
                    }
                    for (std::size_t e = 0; e < extent; ++e) {
                      const std::size_t i = (o * extent + e) * inner + in;
                      dX[i] += Y[i] * (dY[i] - dot);
                    }
                  }
                }
              });
}

template <typename T>
Var Graph<T>::layer_norm(Var x, Var gamma, Var beta, T eps) {
  check(x);
  check(gamma);
  check(beta);
  if (!(eps > T(0))) {
    fail(ErrorKind::kParameter, "layer_norm eps must be positive");
  }
  const Tensor<T>& X = val(x.id);
  const std::size_t c = X.cols();
  if (val(gamma.id).size() != c || val(beta.id).size() != c) {
    fail(ErrorKind::kDimension,
         "layer_norm gamma/beta " + shape_to_string(val(gamma.id).shape()) +
             "/" + shape_to_string(val(beta.id).shape()) + " vs input " +
             shape_to_string(X.shape()));
  }
  const std::size_t rows = X.rows();
  const Tensor<T>& G = val(gamma.id);
  const Tensor<T>& B = val(beta.id);
  Tensor<T> out(X.shape());
  // saved = [xhat (rows*c) | rstd (rows)]
  Tensor<T> saved({rows * c + rows});
  for (std::size_t r = 0; r < rows; ++r) {
    auto xr = X.row(r);
    T mean = 0;
    for (T v : xr) mean += v;
    mean /= static_cast<T>(c);
    T var = 0;
    for (T v : xr) var += (v - mean) * (v - mean);
    var /= static_cast<T>(c);
    const T rstd = T(1) / std::sqrt(var + eps);
    saved[rows * c + r] = rstd;
    for (std::size_t j = 0; j < c; ++j) {
      const T xh = (xr[j] - mean) * rstd;
      saved[r * c + j] = xh;
      out(r, j) = G[j] * xh + B[j];
    }
  }
  Var y = push(OpKind::kLayerNorm, std::move(out), {x.id, gamma.id, beta.id},
               [rows, c](Graph& g, int self) {
                 const auto& in = g.node(self).inputs;
                 const Tensor<T>& S = g.node(self).saved;
                 const Tensor<T>& dY = g.node(self).grad;
                 const Tensor<T>& G = g.val(in[1]);
                 if (g.needs_grad(in[1])) {
                   Tensor<T>& dG = g.grad_ref(in[1]);
                   for (std::size_t r = 0; r < rows; ++r) {
                     for (std::size_t j = 0; j < c; ++j) {
                       dG[j] += dY(r, j) * S[r * c + j];
                     }
                   }
                 }
                 if (g.needs_grad(in[2])) {
                   Tensor<T>& dB = g.grad_ref(in[2]);
                   for (std::size_t r = 0; r < rows; ++r) {
                     for (std::size_t j = 0; j < c; ++j) dB[j] += dY(r, j);
                   }
                 }
                 if (g.needs_grad(in[0])) {
                   Tensor<T>& dX = g.grad_ref(in[0]);
                   for (std::size_t r = 0; r < rows; ++r) {
                     const T rstd = S[rows * c + r];
                     T m1 = 0, m2 = 0;
                     for (std::size_t j = 0; j < c; ++j) {
                       const T dxh = dY(r, j) * G[j];
                       m1 += dxh;
                       m2 += dxh * S[r * c + j];
                     }
                     m1 /= static_cast<T>(c);
                     m2 /= static_cast<T>(c);
                     for (std::size_t j = 0; j < c; ++j) {
                       const T dxh = dY(r, j) * G[j];
                       dX(r, j) += rstd * (dxh - m1 - S[r * c + j] * m2);
                     }
                   }
                 }
               });
  nodes_[y.id].saved = std::move(saved);
  return y;
}

template <typename T>
Var Graph<T>::dropout(Var a, T rate) {
  check(a);
  if (rate < T(0) || rate >= T(1)) {
    fail(ErrorKind::kParameter, "dropout rate must lie in [0, 1)");
  }
  if (!training_ || rate == T(0)) return a;
  const Tensor<T>& A = val(a.id);
  Tensor<T> mask(A.shape());
  const T keep = T(1) / (T(1) - rate);
  for (auto& m : mask.values()) {
    // 53 random bits mapped onto [0, 1).
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    m = u < static_cast<double>(rate) ? T(0) : keep;
  }
  Tensor<T> out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  Var y = push(OpKind::kDropout, std::move(out), {a.id}, [](Graph& g, int self) {
    const Tensor<T>& M = g.node(self).saved;
    const Tensor<T>& dY = g.node(self).grad;
    Tensor<T>& dX = g.grad_ref(g.node(self).inputs[0]);
    for (std::size_t i = 0; i < dY.size(); ++i) dX[i] += dY[i] * M[i];
  });
  nodes_[y.id].saved = std::move(mask);
  return y;
}

template <typename T>
Var Graph<T>::embedding(Var table, std::span<const int> ids) {
  check(table);
  const Tensor<T>& W = val(table.id);
  require_matrix(W, "embedding");
  if (ids.empty()) fail(ErrorKind::kEncoding, "empty id sequence");
  const std::size_t vocab = W.dim(0), d = W.dim(1);
  Tensor<T> out({ids.size(), d});
  std::vector<int> idv(ids.begin(), ids.end());
  for (std::size_t i = 0; i < idv.size(); ++i) {
    if (idv[i] < 0 || static_cast<std::size_t>(idv[i]) >= vocab) {
      fail(ErrorKind::kEncoding, "token id " + std::to_string(idv[i]) +
                                     " outside table of " +
                                     std::to_string(vocab) + " rows");
    }
    std::copy_n(W.data() + idv[i] * d, d, out.data() + i * d);
  }
  return push(OpKind::kEmbedding, std::move(out), {table.id},
              [idv = std::move(idv), d](Graph& g, int self) {
                const Tensor<T>& dY = g.node(self).grad;
                Tensor<T>& dW = g.grad_ref(g.node(self).inputs[0]);
                for (std::size_t i = 0; i < idv.size(); ++i) {
                  T* dst = dW.data() + idv[i] * d;
                  const T* src = dY.data() + i * d;
                  for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                }
              });
}

template <typename T>
Var Graph<T>::rows(Var a, std::size_t begin, std::size_t count) {
  check(a);
  const Tensor<T>& A = val(a.id);
  require_matrix(A, "rows");
  if (count == 0 || begin + count > A.dim(0)) {
    fail(ErrorKind::kDimension, "row range [" + std::to_string(begin) + ", " +
                                    std::to_string(begin + count) +
                                    ") outside " + shape_to_string(A.shape()));
  }
  const std::size_t c = A.dim(1);
  Tensor<T> out({count, c});
  std::copy_n(A.data() + begin * c, count * c, out.data());
  return push(OpKind::kRows, std::move(out), {a.id},
              [begin, c](Graph& g, int self) {
                const Tensor<T>& dY = g.node(self).grad;
                Tensor<T>& dX = g.grad_ref(g.node(self).inputs[0]);
                T* dst = dX.data() + begin * c;
                for (std::size_t i = 0; i < dY.size(); ++i) dst[i] += dY[i];
              });
}

template <typename T>
Var Graph<T>::cols(Var a, std::size_t begin, std::size_t count) {
  check(a);
  const Tensor<T>& A = val(a.id);
  require_matrix(A, "cols");
  if (count == 0 || begin + count > A.dim(1)) {
    fail(ErrorKind::kDimension, "column range outside " +
                                    shape_to_string(A.shape()));
  }
  const std::size_t r = A.dim(0), c = A.dim(1);
  Tensor<T> out({r, count});
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(A.data() + i * c + begin, count, out.data() + i * count);
  }
  return push(OpKind::kCols, std::move(out), {a.id},
              [begin, count, r, c](Graph& g, int self) {
                const Tensor<T>& dY = g.node(self).grad;
                Tensor<T>& dX = g.grad_ref(g.node(self).inputs[0]);
                for (std::size_t i = 0; i < r; ++i) {
                  for (std::size_t j = 0; j < count; ++j) {
                    dX[i * c + begin + j] += dY[i * count + j];
                  }
                }
              });
}

template <typename T>
Var Graph<T>::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorKind::kDimension, "concat_cols of nothing");
  std::vector<int> ids;
  std::vector<std::size_t> widths;
  const std::size_t r = val(parts[0].id).dim(0);
  std::size_t total = 0;
  for (Var p : parts) {
    check(p);
    const Tensor<T>& P = val(p.id);
    require_matrix(P, "concat_cols");
    if (P.dim(0) != r) {
      fail(ErrorKind::kDimension, "concat_cols row mismatch at " +
                                      shape_to_string(P.shape()));
    }
    ids.push_back(p.id);
    widths.push_back(P.dim(1));
    total += P.dim(1);
  }
  Tensor<T> out({r, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const Tensor<T>& P = val(ids[k]);
    for (std::size_t i = 0; i < r; ++i) {
      std::copy_n(P.data() + i * widths[k], widths[k],
                  out.data() + i * total + off);
    }
    off += widths[k];
  }
  return push(OpKind::kConcatCols, std::move(out), std::move(ids),
              [widths, r, total](Graph& g, int self) {
                const Tensor<T>& dY = g.node(self).grad;
                std::size_t off = 0;
                for (std::size_t k = 0; k < widths.size(); ++k) {
                  const int in = g.node(self).inputs[k];
                  if (g.needs_grad(in)) {
                    Tensor<T>& dX = g.grad_ref(in);
                    for (std::size_t i = 0; i < r; ++i) {
                      for (std::size_t j = 0; j < widths[k]; ++j) {
                        dX[i * widths[k] + j] += dY[i * total + off + j];
                      }
                    }
                  }
                  off += widths[k];
                }
              });
}

template <typename T>
Var Graph<T>::concat(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorKind::kDimension, "concat of nothing");
  std::vector<int> ids;
  std::vector<T> data;
  for (Var p : parts) {
    check(p);
    ids.push_back(p.id);
    const Tensor<T>& P = val(p.id);
    data.insert(data.end(), P.values().begin(), P.values().end());
  }
  const std::size_t n = data.size();
  return push(OpKind::kConcat, Tensor<T>({n}, std::move(data)), std::move(ids),
              [](Graph& g, int self) {
                const Tensor<T>& dY = g.node(self).grad;
                std::size_t off = 0;
                for (int in : g.node(self).inputs) {
                  const std::size_t len = g.val(in).size();
                  if (g.needs_grad(in)) {
                    Tensor<T>& dX = g.grad_ref(in);
                    for (std::size_t i = 0; i < len; ++i) dX[i] += dY[off + i];
                  }
                  off += len;
                }
              });
}

template <typename T>
Var Graph<T>::transpose(Var a) {
  check(a);
  const Tensor<T>& A = val(a.id);
  require_matrix(A, "transpose");
  const std::size_t r = A.dim(0), c = A.dim(1);
  Tensor<T> out({c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out(j, i) = A(i, j);
  }
  return push(OpKind::kTranspose, std::move(out), {a.id},
              [r, c](Graph& g, int self) {
                const Tensor<T>& dY = g.node(self).grad;
                Tensor<T>& dX = g.grad_ref(g.node(self).inputs[0]);
                for (std::size_t i = 0; i < r; ++i) {
                  for (std::size_t j = 0; j < c; ++j) dX(i, j) += dY(j, i);
                }
              });
}

template <typename T>
Var Graph<T>::attention(Var q, Var k, Var v, std::size_t heads, bool causal) {
  check(q);
  check(k);
  check(v);
  const Tensor<T>& Q = val(q.id);
  const Tensor<T>& K = val(k.id);
  const Tensor<T>& V = val(v.id);
  require_matrix(Q, "attention");
  require_matrix(K, "attention");
  require_matrix(V, "attention");
  const std::size_t nq = Q.dim(0), nk = K.dim(0), d = Q.dim(1);
  if (K.dim(1) != d || V.shape() != K.shape()) {
    fail(ErrorKind::kDimension, "attention query " + shape_to_string(Q.shape()) +
                                    " key " + shape_to_string(K.shape()) +
                                    " value " + shape_to_string(V.shape()));
  }
  if (heads == 0 || d % heads != 0) {
    fail(ErrorKind::kDimension, "width " + std::to_string(d) +
                                    " not divisible by " +
                                    std::to_string(heads) + " heads");
  }
  if (causal && nq != nk) {
    fail(ErrorKind::kDimension, "causal attention needs equal lengths");
  }
  Tensor<T> out({nq, d});
  Tensor<T> weights({heads, nq, nk});
  kernels::attention_forward(nq, nk, d, heads, causal, Q.data(), K.data(),
                             V.data(), out.data(), weights.data());
  Var y = push(OpKind::kAttention, std::move(out), {q.id, k.id, v.id},
               [nq, nk, d, heads](Graph& g, int self) {
                 const auto& in = g.node(self).inputs;
                 T* dq = g.needs_grad(in[0]) ? g.grad_ref(in[0]).data() : nullptr;
                 T* dk = g.needs_grad(in[1]) ? g.grad_ref(in[1]).data() : nullptr;
                 T* dv = g.needs_grad(in[2]) ? g.grad_ref(in[2]).data() : nullptr;
                 kernels::attention_backward(
                     nq, nk, d, heads, g.val(in[0]).data(), g.val(in[1]).data(),
                     g.val(in[2]).data(), g.node(self).saved.data(),
                     g.node(self).grad.data(), dq, dk, dv);
               });
  nodes_[y.id].saved = std::move(weights);
  return y;
}

template <typename T>
const Tensor<T>& Graph<T>::attention_weights(Var attention_out) const {
  check(attention_out);
  const Node& n = nodes_[attention_out.id];
  if (n.op != OpKind::kAttention) {
    fail(ErrorKind::kContract, "variable is not an attention output");
  }
  return n.saved;
}

template <typename T>
Var Graph<T>::cross_entropy(Var logits, std::size_t gold) {
  check(logits);
  const Tensor<T>& L = val(logits.id);
  const std::size_t n = L.size();
  Tensor<T> probs({n});
  T loss = 0;
  if (n == 1) {
    if (gold > 1) {
      fail(ErrorKind::kLabel, "binary label must be yes or no, got index " +
                                  std::to_string(gold));
    }
    const T z = L[0];
    // softplus(-z) for yes, softplus(z) for no, evaluated stably.
    const T s = gold == 1 ? -z : z;
    loss = std::max(s, T(0)) + std::log1p(std::exp(-std::abs(s)));
    probs[0] = T(1) / (T(1) + std::exp(-z));
  } else {
    if (gold >= n) {
      fail(ErrorKind::kLabel, "gold index " + std::to_string(gold) +
                                  " outside " + std::to_string(n) + " logits");
    }
    kernels::softmax_rows<T>(1, n, L.data(), probs.data());
    const T mx = *std::max_element(L.values().begin(), L.values().end());
    T sum = 0;
    for (T v : L.values()) sum += std::exp(v - mx);
    loss = mx + std::log(sum) - L[gold];
  }
  Var y = push(OpKind::kCrossEntropy, Tensor<T>::scalar(loss), {logits.id},
               [gold, n](Graph& g, int self) {
                 const Tensor<T>& P = g.node(self).saved;
                 const T d = g.node(self).grad[0];
                 Tensor<T>& dL = g.grad_ref(g.node(self).inputs[0]);
                 if (n == 1) {
                   dL[0] += d * (P[0] - static_cast<T>(gold));
                 } else {
                   for (std::size_t i = 0; i < n; ++i) {
                     dL[i] += d * (P[i] - (i == gold ? T(1) : T(0)));
                   }
                 }
               });
  nodes_[y.id].saved = std::move(probs);
  return y;
}

template <typename T>
void Graph<T>::backward(Var root) {
  check(root);
  if (val(root.id).size() != 1) {
    fail(ErrorKind::kContract, "backward needs a scalar root, got shape " +
                                   shape_to_string(val(root.id).shape()));
  }
  if (!needs_grad(root.id)) return;
  // Leaves accumulate across calls; interior gradients start fresh.
  for (auto& n : nodes_) {
    if (n.backward) n.grad = Tensor<T>();
  }
  grad_ref(root.id)[0] += T(1);
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
}

template <typename T>
void Graph<T>::accumulate_param_grads(std::span<Tensor<T>> grads) const {
  for (const auto& [index, id] : param_nodes_) {
    const Node& n = nodes_[id];
    if (n.grad.empty()) continue;
    if (index >= grads.size() || grads[index].shape() != n.grad.shape()) {
      fail(ErrorKind::kDimension, "gradient buffer does not match parameter " +
                                      std::to_string(index));
    }
    axpy<T>(grads[index].values(), n.grad.values());
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace mhka
