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

#include "mhka/gradcheck.hpp"

namespace mhka {

GradCheckReport gradcheck_model(MhkaModel<double>& model, const EncodedExample& example,
                                double h) {
  auto& params = model.parameters();
  auto loss = [&](const ParameterStore<double>&) {
    Graph<double> g(false);
    return g.value(g.cross_entropy(model.logits(g, example), example.gold))[0];
  };
  Graph<double> g(false);
  Var l = g.cross_entropy(model.logits(g, example), example.gold);
  g.backward(l);
  auto analytic = params.zeros_like();
  g.accumulate_param_grads(analytic);
  auto numeric = finite_diff_grad<double>(loss, params, h);
  return compare_gradients(params, analytic, numeric);
}

GradCheckCase tiny_gradcheck_case() {
  GradCheckCase c;
  c.instance.id = "gradcheck";
  c.instance.o1 = "Dotty";
  c.instance.h1 = "ran";
  c.instance.h2 = "slept";
  c.instance.o2 = "home";
  c.instance.gold = 1;
  c.instance.rules[0] = {{"ran", Relation::kXReact, "tired", Relevance::kRelevant},
                         {"Dotty", Relation::kXAttr, "fast", Relevance::kIrrelevant}};
  c.instance.rules[1] = {{"slept", Relation::kXReact, "rested", Relevance::kRelevant},
                         {"Dotty", Relation::kXWant, "food", Relevance::kIrrelevant}};
  std::vector<std::string> texts;
  collect_texts(std::vector<AlphaNliInstance>{c.instance}, texts);
  c.vocab = Vocabulary::build(texts, 1);
  c.config.d_model = 8;
  c.config.n_heads = 2;
  c.config.ctx_layers = c.config.know_layers = c.config.reason_layers = 1;
  c.config.d_ff = 16;
  c.config.vocab_size = c.vocab.size();
  c.config.max_positions = 16;
  c.config.knowledge_max_positions = 32;
  c.config.dropout = 0;
  // Large enough that every nonlinearity leaves its linear regime.
  c.config.init_std = 0.3;
  return c;
}

}  // namespace mhka
