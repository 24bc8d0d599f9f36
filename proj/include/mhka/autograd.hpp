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

// Tape-based reverse-mode automatic differentiation.
//
// A Graph records every operation of one forward pass as a node appended in
// execution order, so the node list is already a topological order and
// backward() is a single reverse sweep. Parameters enter as leaves that
// reference the ParameterStore (no copy); their gradients are read out with
// accumulate_param_grads() into caller-owned buffers. One graph belongs to
// one thread; data-parallel training builds one graph per instance.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "mhka/parameters.hpp"
#include "mhka/tensor.hpp"

namespace mhka {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

enum class OpKind {
  kConstant,
  kInput,
  kParameter,
  kMatmul,
  kAdd,
  kAddRow,
  kMul,
  kScale,
  kSum,
  kGelu,
  kSoftmax,
  kLayerNorm,
  kDropout,
  kEmbedding,
  kRows,
  kCols,
  kConcatCols,
  kConcat,
  kTranspose,
  kAttention,
  kCrossEntropy,
};

template <typename T>
class Graph {
 public:
  // `training` enables dropout; masks are drawn from `seed`.
  explicit Graph(bool training = false, std::uint64_t seed = 0);

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor<T> value);
  Var input(Tensor<T> value, bool requires_grad = true);
  // Leaf bound to store[index]. Repeated calls return the same node.
  Var param(const ParameterStore<T>& store, std::size_t index);

  const Tensor<T>& value(Var v) const;
  // Gradient of the last backward root w.r.t. v (zeros if unreached).
  Tensor<T> grad(Var v) const;
  std::size_t node_count() const { return nodes_.size(); }
  OpKind op(Var v) const { return nodes_.at(v.id).op; }
  std::span<const int> inputs(Var v) const { return nodes_.at(v.id).inputs; }
  bool training() const { return training_; }

  // c = a[m x k] * b[k x n]
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  // a[r x c] + row[c], broadcast over rows.
  Var add_row(Var a, Var row);
  Var mul(Var a, Var b);
  Var scale(Var a, T factor);
  // Scalar [1] sum of all elements.
  Var sum(Var a);
  Var gelu(Var a);
  Var softmax(Var a, int axis);
  // Normalizes over the last axis; gamma and beta have that extent.
  Var layer_norm(Var x, Var gamma, Var beta, T eps);
  Var dropout(Var a, T rate);
  // Gathers rows of table[V x d] -> [ids.size() x d].
  Var embedding(Var table, std::span<const int> ids);
  Var rows(Var a, std::size_t begin, std::size_t count);
  Var cols(Var a, std::size_t begin, std::size_t count);
  Var concat_cols(std::span<const Var> parts);
  // Flattens and concatenates into a 1-D tensor.
  Var concat(std::span<const Var> parts);
  Var transpose(Var a);
  // Fused multi-head scaled dot-product attention over projected q, k, v.
  Var attention(Var q, Var k, Var v, std::size_t heads, bool causal);
  // [heads x nq x nk] weights saved by an attention node.
  const Tensor<T>& attention_weights(Var attention_out) const;
  // -log p(gold). For n >= 2, softmax over logits and gold in [0, n). For
  // n == 1, logistic on the single logit and gold in {0 = no, 1 = yes}.
  Var cross_entropy(Var logits, std::size_t gold);

  // Reverse sweep from a scalar root. Gradients accumulate across calls.
  void backward(Var root);

  // Adds parameter-leaf gradients into grads[parameter index].
  void accumulate_param_grads(std::span<Tensor<T>> grads) const;

 private:
  struct Node {
    OpKind op = OpKind::kConstant;
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    Tensor<T> saved;
    std::vector<int> inputs;
    std::function<void(Graph&, int)> backward;
    long param_index = -1;
    bool requires_grad = false;
  };

  Var push(OpKind op, Tensor<T> value, std::vector<int> inputs,
           std::function<void(Graph&, int)> backward);
  const Tensor<T>& val(int id) const;
  Tensor<T>& grad_ref(int id);
  bool needs_grad(int id) const { return nodes_[id].requires_grad; }
  Node& node(int id) { return nodes_[id]; }
  void check(Var v) const;

  std::vector<Node> nodes_;
  std::unordered_map<std::size_t, int> param_nodes_;
  bool training_;
  Rng rng_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace mhka
