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

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "mhka/autograd.hpp"
#include "mhka/error.hpp"
#include "mhka/gradcheck.hpp"

namespace mhka {
namespace {

using G = Graph<double>;
using Build = std::function<Var(G&, const std::vector<Var>&)>;

Tensor<double> randn(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  return normal_tensor<double>(std::move(shape), scale, rng);
}

// Loss = sum(out * W) for a fixed random W, so every output coordinate
// carries a distinct weight.
double forward_loss(const std::vector<Tensor<double>>& inputs, const Build& build,
                    bool training, G* keep, std::vector<Var>* vars_out) {
  std::unique_ptr<G> local;
  G* g = keep;
  if (!g) {
    local = std::make_unique<G>(training, 99);
    g = local.get();
  }
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g->input(t));
  Var out = build(*g, vars);
  const auto& shape = g->value(out).shape();
  Var loss = g->value(out).size() == 1 && shape.size() == 1
                 ? out
                 : g->sum(g->mul(out, g->constant(randn(shape, 1234))));
  if (vars_out) {
    *vars_out = vars;
    g->backward(loss);
  }
  return g->value(loss)[0];
}

void check_op(const std::vector<Tensor<double>>& inputs, const Build& build,
              bool training = false, double tol = 1e-6) {
  G g(training, 99);
  std::vector<Var> vars;
  forward_loss(inputs, build, training, &g, &vars);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor<double> analytic = g.grad(vars[i]);
    auto f = [&](const Tensor<double>& x) {
      auto copy = inputs;
      copy[i] = x;
      return forward_loss(copy, build, training, nullptr, nullptr);
    };
    const Tensor<double> numeric =
        finite_diff_grad<double>(std::function<double(const Tensor<double>&)>(f), inputs[i], 1e-5);
    ASSERT_EQ(analytic.shape(), numeric.shape());
    for (std::size_t j = 0; j < analytic.size(); ++j) {
      const double scale = std::max({1.0, std::abs(analytic[j]), std::abs(numeric[j])});
      EXPECT_NEAR(analytic[j], numeric[j], tol * scale) << "input " << i << " coord " << j;
    }
  }
}

TEST(AutogradGrad, Matmul) {
  check_op({randn({3, 4}, 1), randn({4, 5}, 2)},
           [](G& g, const std::vector<Var>& v) { return g.matmul(v[0], v[1]); });
}

TEST(AutogradGrad, AddMulScale) {
  check_op({randn({3, 4}, 3), randn({3, 4}, 4)}, [](G& g, const std::vector<Var>& v) {
    return g.scale(g.mul(g.add(v[0], v[1]), v[0]), 0.7);
  });
}

TEST(AutogradGrad, AddRowBroadcast) {
  check_op({randn({3, 4}, 5), randn({4}, 6)},
           [](G& g, const std::vector<Var>& v) { return g.add_row(v[0], v[1]); });
}

TEST(AutogradGrad, SumAndGelu) {
  check_op({randn({2, 5}, 7, 2.0)},
           [](G& g, const std::vector<Var>& v) { return g.sum(g.gelu(v[0])); });
}

TEST(AutogradGrad, SoftmaxBothAxes) {
  check_op({randn({3, 4}, 8)}, [](G& g, const std::vector<Var>& v) { return g.softmax(v[0], 1); });
  check_op({randn({3, 4}, 9)}, [](G& g, const std::vector<Var>& v) { return g.softmax(v[0], 0); });
}

TEST(AutogradGrad, LayerNorm) {
  check_op({randn({3, 6}, 10), randn({6}, 11), randn({6}, 12)},
           [](G& g, const std::vector<Var>& v) { return g.layer_norm(v[0], v[1], v[2], 1e-5); });
}

TEST(AutogradGrad, DropoutWithFixedMask) {
  check_op({randn({4, 5}, 13)}, [](G& g, const std::vector<Var>& v) { return g.dropout(v[0], 0.3); },
           true);
}

TEST(AutogradGrad, EmbeddingWithRepeatedIds) {
  const std::vector<int> ids = {2, 0, 2, 3};
  check_op({randn({5, 3}, 14)},
           [&](G& g, const std::vector<Var>& v) { return g.embedding(v[0], ids); });
}

TEST(AutogradGrad, RowsColsTranspose) {
  check_op({randn({5, 6}, 15)}, [](G& g, const std::vector<Var>& v) {
    return g.transpose(g.cols(g.rows(v[0], 1, 3), 2, 3));
  });
}

TEST(AutogradGrad, ConcatColsAndConcat) {
  check_op({randn({3, 2}, 16), randn({3, 4}, 17)}, [](G& g, const std::vector<Var>& v) {
    std::vector<Var> parts = {v[0], v[1]};
    return g.concat_cols(parts);
  });
  check_op({randn({2, 2}, 18), randn({3}, 19)}, [](G& g, const std::vector<Var>& v) {
    std::vector<Var> parts = {v[0], v[1]};
    return g.concat(parts);
  });
}

TEST(AutogradGrad, AttentionSelfAndCross) {
  for (bool causal : {false, true}) {
    check_op({randn({5, 8}, 20), randn({5, 8}, 21), randn({5, 8}, 22)},
             [causal](G& g, const std::vector<Var>& v) {
               return g.attention(v[0], v[1], v[2], 2, causal);
             });
  }
  check_op({randn({3, 8}, 23), randn({7, 8}, 24), randn({7, 8}, 25)},
           [](G& g, const std::vector<Var>& v) { return g.attention(v[0], v[1], v[2], 4, false); });
}

TEST(AutogradGrad, CrossEntropyMultiAndBinary) {
  check_op({randn({3}, 26)}, [](G& g, const std::vector<Var>& v) { return g.cross_entropy(v[0], 2); });
  check_op({randn({1}, 27)}, [](G& g, const std::vector<Var>& v) { return g.cross_entropy(v[0], 1); });
  check_op({randn({1}, 28)}, [](G& g, const std::vector<Var>& v) { return g.cross_entropy(v[0], 0); });
}

TEST(Autograd, BinaryCrossEntropyIsLogistic) {
  G g;
  Var z = g.input(Tensor<double>::vector({0.8}));
  EXPECT_NEAR(g.value(g.cross_entropy(z, 1))[0], std::log1p(std::exp(-0.8)), 1e-12);
  EXPECT_NEAR(g.value(g.cross_entropy(z, 0))[0], std::log1p(std::exp(0.8)), 1e-12);
}

TEST(Autograd, CrossEntropyRejectsBadLabels) {
  G g;
  Var two = g.input(Tensor<double>::vector({0.1, 0.2}));
  Var one = g.input(Tensor<double>::vector({0.1}));
  try {
    g.cross_entropy(two, 2);
    FAIL() << "expected a label error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLabel);
  }
  EXPECT_THROW(g.cross_entropy(one, 2), Error);
}

TEST(Autograd, LayerNormNormalizesRows) {
  G g;
  Var x = g.input(randn({4, 16}, 30, 5.0));
  Var y = g.layer_norm(x, g.input(Tensor<double>({16}, 1.0)), g.input(Tensor<double>({16}, 0.0)),
                       1e-5);
  const auto& Y = g.value(y);
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0, var = 0;
    for (double v : Y.row(r)) mean += v;
    mean /= 16;
    for (double v : Y.row(r)) var += (v - mean) * (v - mean);
    var /= 16;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-5);
  }
}

TEST(Autograd, DropoutIsIdentityOutsideTraining) {
  G g(false);
  const auto t = randn({3, 3}, 31);
  EXPECT_EQ(g.value(g.dropout(g.input(t), 0.5)), t);
}

TEST(Autograd, DropoutKeepsOrZeroesWithInverseScaling) {
  G g(true, 7);
  const Tensor<double> ones({50, 40}, 1.0);
  const auto& y = g.value(g.dropout(g.input(ones), 0.25));
  std::size_t kept = 0;
  for (double v : y.values()) {
    if (v != 0.0) {
      EXPECT_NEAR(v, 1.0 / 0.75, 1e-12);
      ++kept;
    }
  }
  EXPECT_NEAR(static_cast<double>(kept) / 2000.0, 0.75, 0.05);
}

TEST(Autograd, ShapeMismatchIsDimensionError) {
  G g;
  try {
    g.matmul(g.input(randn({2, 3}, 1)), g.input(randn({2, 3}, 2)));
    FAIL() << "expected a dimension error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
    EXPECT_EQ(std::string(e.what()).rfind("dimension error: ", 0), 0u);
  }
}

TEST(Autograd, AttentionWeightsRequireAttentionNode) {
  G g;
  Var x = g.input(randn({2, 2}, 1));
  EXPECT_THROW(g.attention_weights(x), Error);
}

TEST(Autograd, GradientsAccumulateAcrossBackwardCalls) {
  G g;
  Var x = g.input(Tensor<double>::vector({1.0, 2.0}));
  Var s = g.sum(g.mul(x, x));
  g.backward(s);
  g.backward(s);
  const auto grad = g.grad(x);
  EXPECT_DOUBLE_EQ(grad[0], 4.0);
  EXPECT_DOUBLE_EQ(grad[1], 8.0);
}

}  // namespace
}  // namespace mhka
