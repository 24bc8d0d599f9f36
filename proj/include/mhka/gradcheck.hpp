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

// Central finite differences, used as the gradient oracle for autograd.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mhka/model.hpp"
#include "mhka/parameters.hpp"

namespace mhka {

// (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate of x.
template <typename T>
Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f,
                           Tensor<T> x, T h) {
  if (!(h > T(0))) fail(ErrorKind::kParameter, "finite difference step must be positive");
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T saved = x[i];
    x[i] = saved + h;
    const T plus = f(x);
    x[i] = saved - h;
    const T minus = f(x);
    x[i] = saved;
    out[i] = (plus - minus) / (T(2) * h);
  }
  return out;
}

// Same, over every parameter of a store. `params` is perturbed in place and
// restored, so `f` sees the store it was handed.
template <typename T>
std::vector<Tensor<T>> finite_diff_grad(
    const std::function<T(const ParameterStore<T>&)>& f,
    ParameterStore<T>& params, T h) {
  if (!(h > T(0))) fail(ErrorKind::kParameter, "finite difference step must be positive");
  std::vector<Tensor<T>> out = params.zeros_like();
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& value = params[p].value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const T saved = value[i];
      value[i] = saved + h;
      const T plus = f(params);
      value[i] = saved - h;
      const T minus = f(params);
      value[i] = saved;
      out[p][i] = (plus - minus) / (T(2) * h);
    }
  }
  return out;
}

struct GradCheckReport {
  double max_relative_error = 0;
  std::string worst_name;
  std::size_t worst_index = 0;
  double worst_analytic = 0;
  double worst_numeric = 0;
  std::size_t coordinates = 0;

  bool passed(double tolerance) const { return max_relative_error < tolerance; }
};

// Elementwise |a - n| / max(|a|, |n|, floor).
template <typename T>
GradCheckReport compare_gradients(const ParameterStore<T>& params,
                                  const std::vector<Tensor<T>>& analytic,
                                  const std::vector<Tensor<T>>& numeric,
                                  double floor = 1e-8) {
  if (analytic.size() != params.size() || numeric.size() != params.size()) {
    fail(ErrorKind::kDimension, "gradient lists do not match the parameter store");
  }
  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < analytic[p].size(); ++i) {
      const double a = analytic[p][i];
      const double n = numeric[p][i];
      const double denom = std::max({std::abs(a), std::abs(n), floor});
      const double rel = std::abs(a - n) / denom;
      ++report.coordinates;
      if (rel > report.max_relative_error || report.worst_name.empty()) {
        if (rel >= report.max_relative_error) {
          report.max_relative_error = rel;
          report.worst_name = params[p].name;
          report.worst_index = i;
          report.worst_analytic = a;
          report.worst_numeric = n;
        }
      }
    }
  }
  return report;
}

// Analytic versus central-difference gradients of one example's loss with
// respect to every model parameter. Dropout is off in both passes.
GradCheckReport gradcheck_model(MhkaModel<double>& model, const EncodedExample& example,
                                double h = 1e-4);

// d_model 8, 2 heads, one layer per stack, over a 6-token alpha-NLI instance
// with two rules per option.
struct GradCheckCase {
  ModelConfig config;
  Vocabulary vocab;
  AlphaNliInstance instance;
};
GradCheckCase tiny_gradcheck_case();

}  // namespace mhka
