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

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mhka/parameters.hpp"

namespace mhka {

// Adam with bias-corrected moments and a fixed learning rate (no decay, no
// schedule).
template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::uint64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(double lr_, double beta1_ = 0.9, double beta2_ = 0.999,
            double eps_ = 1e-8)
      : lr(lr_), beta1(beta1_), beta2(beta2_), eps(eps_) {}

  void validate() const {
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) {
      fail(ErrorKind::kParameter, "Adam betas must lie in [0, 1)");
    }
    if (!(eps > 0)) fail(ErrorKind::kParameter, "Adam eps must be positive");
    if (!(lr > 0)) fail(ErrorKind::kParameter, "learning rate must be positive");
  }
};

// One update of `params` from `grads`. Moments are created lazily on the
// first call; the step counter is incremented before bias correction.
template <typename T>
void adam_step(std::span<Tensor<T>* const> params,
               std::span<const Tensor<T>* const> grads, AdamState<T>& state) {
  state.validate();
  if (params.size() != grads.size()) {
    fail(ErrorKind::kDimension, "adam_step got " + std::to_string(params.size()) +
                                    " parameters and " +
                                    std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    for (const Tensor<T>* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) {
    fail(ErrorKind::kDimension, "Adam state tracks " +
                                    std::to_string(state.m.size()) +
                                    " parameters, got " +
                                    std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape() ||
        state.m[i].shape() != params[i]->shape()) {
      fail(ErrorKind::kDimension,
           "adam_step parameter " + shape_to_string(params[i]->shape()) +
               " vs gradient " + shape_to_string(grads[i]->shape()));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  const T lr = static_cast<T>(state.lr), eps = static_cast<T>(state.eps);
  const T inv_c1 = static_cast<T>(1.0 / c1), inv_c2 = static_cast<T>(1.0 / c2);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->values();
    auto g = grads[i]->values();
    auto m = state.m[i].values();
    auto v = state.v[i].values();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      const T mhat = m[j] * inv_c1;
      const T vhat = v[j] * inv_c2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// Steps every trainable parameter of the store using its own grad buffer.
template <typename T>
void adam_step(ParameterStore<T>& store, AdamState<T>& state) {
  std::vector<Tensor<T>*> params;
  std::vector<const Tensor<T>*> grads;
  for (auto& p : store) {
    params.push_back(&p.value);
    grads.push_back(&p.grad);
  }
  // Frozen parameters keep a zero gradient and therefore do not move.
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!store[i].requires_grad) store[i].grad.fill(T(0));
  }
  adam_step<T>(params, grads, state);
}

}  // namespace mhka
