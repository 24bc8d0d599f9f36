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

#include "mhka/analysis.hpp"
#include "mhka/error.hpp"

namespace mhka {
namespace {

KnowledgeRule rule(const std::string& head, Relation rel, const std::string& tail,
                   std::optional<Relevance> relevance) {
  return {head, rel, tail, relevance};
}

AlphaNliInstance labeled() {
  AlphaNliInstance x;
  x.id = "q";
  x.o1 = "Ann was bored.";
  x.o2 = "Ann felt happy afterwards.";
  x.h1 = "Ann baked cakes.";
  x.h2 = "Ann washed cars.";
  x.gold = 1;
  x.rules[0] = {rule("Ann baked cakes", Relation::kXReact, "nice", Relevance::kRelevant),
                rule("Ann baked cakes", Relation::kXNeed, "flour", Relevance::kPartial),
                rule("Ann was bored", Relation::kOWant, "music", Relevance::kIrrelevant),
                rule("Ann baked cakes", Relation::kXIntent, "lonely", Relevance::kRelevant)};
  x.rules[1] = {rule("Ann washed cars", Relation::kXReact, "tired", Relevance::kRelevant),
                rule("Ann washed cars", Relation::kXWant, "rest", Relevance::kIrrelevant)};
  return x;
}

PerturbationSpec spec(PerturbationMode mode) {
  PerturbationSpec s;
  s.mode = mode;
  return s;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kUsage;
}

const AntonymMap kAntonyms = {{"nice", "mean"}, {"mean", "nice"}};

TEST(Perturb, RemoveIrrelevantKeepsRelevantAndPartial) {
  const auto y = apply_perturbation(labeled(), spec(PerturbationMode::kRemoveIrrelevant), {});
  ASSERT_EQ(y.rules[0].size(), 3u);
  EXPECT_EQ(y.rules[0][1].tail, "flour");
  ASSERT_EQ(y.rules[1].size(), 1u);
  EXPECT_EQ(y.o1, labeled().o1);
}

TEST(Perturb, RemoveRelevantAndPartialKeepsOnlyIrrelevant) {
  const auto y =
      apply_perturbation(labeled(), spec(PerturbationMode::kRemoveRelevantAndPartial), {});
  ASSERT_EQ(y.rules[0].size(), 1u);
  EXPECT_EQ(y.rules[0][0].tail, "music");
  ASSERT_EQ(y.rules[1].size(), 1u);
  EXPECT_EQ(y.rules[1][0].tail, "rest");
}

TEST(Perturb, ReplaceRelevantUsesAntonymThenNegation) {
  const auto y = apply_perturbation(labeled(), spec(PerturbationMode::kReplaceRelevant), kAntonyms);
  EXPECT_EQ(y.rules[0][0].tail, "mean");
  EXPECT_EQ(y.rules[0][1].tail, "flour");
  EXPECT_EQ(y.rules[0][3].tail, "not lonely");
  EXPECT_EQ(y.rules[1][0].tail, "not tired");
  EXPECT_EQ(y.rules[0].size(), 4u);
}

TEST(Perturb, DropRelationsRemovesListedRelationsOnly) {
  auto s = spec(PerturbationMode::kDropRelations);
  s.relation_set = std::vector<Relation>{Relation::kXReact, Relation::kOWant};
  auto x = labeled();
  for (auto& r : x.rules[0]) r.relevance.reset();
  const auto y = apply_perturbation(x, s, {});
  ASSERT_EQ(y.rules[0].size(), 2u);
  EXPECT_EQ(y.rules[0][0].relation, Relation::kXNeed);
  EXPECT_EQ(y.rules[0][1].relation, Relation::kXIntent);
}

TEST(Perturb, DropRandomCountsAndDeterminism) {
  auto s = spec(PerturbationMode::kDropRandom);
  s.k = 0;
  const auto x = labeled();
  const auto same = apply_perturbation(x, s, {});
  EXPECT_EQ(same.rules[0].size(), 4u);
  EXPECT_EQ(same.rules[1].size(), 2u);

  s.k = 2;
  s.seed = 5;
  const auto a = apply_perturbation(x, s, {});
  const auto b = apply_perturbation(x, s, {});
  EXPECT_EQ(a.rules[0].size(), 2u);
  EXPECT_EQ(a.rules[1].size(), 0u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(a.rules[0][i].tail, b.rules[0][i].tail);
  // Survivors keep their original order.
  std::vector<std::string> all;
  for (const auto& r : x.rules[0]) all.push_back(r.tail);
  const auto p0 = std::find(all.begin(), all.end(), a.rules[0][0].tail);
  const auto p1 = std::find(all.begin(), all.end(), a.rules[0][1].tail);
  EXPECT_LT(p0, p1);

  s.k = 100;
  const auto empty = apply_perturbation(x, s, {});
  EXPECT_TRUE(empty.rules[0].empty());
  EXPECT_TRUE(empty.rules[1].empty());
}

TEST(Perturb, DropRandomCanProtectRelevantRules) {
  auto s = spec(PerturbationMode::kDropRandom);
  s.k = 10;
  s.protect_relevant = true;
  const auto y = apply_perturbation(labeled(), s, {});
  ASSERT_EQ(y.rules[0].size(), 2u);
  for (const auto& r : y.rules[0]) EXPECT_EQ(r.relevance, Relevance::kRelevant);
}

TEST(Perturb, MissingLabelsAndIncompleteSpecsAreSpecErrors) {
  auto x = labeled();
  x.rules[1][1].relevance.reset();
  EXPECT_EQ(kind_of([&] { apply_perturbation(x, spec(PerturbationMode::kRemoveIrrelevant), {}); }),
            ErrorKind::kSpec);
  EXPECT_EQ(kind_of([&] { apply_perturbation(x, spec(PerturbationMode::kDropRelations), {}); }),
            ErrorKind::kSpec);
  EXPECT_EQ(kind_of([&] { apply_perturbation(x, spec(PerturbationMode::kDropRandom), {}); }),
            ErrorKind::kSpec);
  EXPECT_EQ(kind_of([] { parse_perturbation_mode("shuffle"); }), ErrorKind::kSpec);
  EXPECT_EQ(kind_of([] { PerturbationSpec::from_json({{"mode", "drop_random"}, {"k", 1}, {"x", 1}}); }),
            ErrorKind::kSpec);
  try {
    apply_perturbation(x, spec(PerturbationMode::kReplaceRelevant), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("instance q option 2 rule 1"), std::string::npos)
        << e.what();
  }
}

TEST(Perturb, SpecJsonRoundTrips) {
  auto s = spec(PerturbationMode::kDropRelations);
  s.relation_set = std::vector<Relation>{Relation::kOEffect};
  s.seed = 9;
  EXPECT_EQ(PerturbationSpec::from_json(s.to_json()).to_json(), s.to_json());
  for (const auto& [m, n] :
       {std::pair{PerturbationMode::kRemoveIrrelevant, "remove_irrelevant"},
        std::pair{PerturbationMode::kDropRandom, "drop_random"}}) {
    EXPECT_EQ(perturbation_mode_name(m), n);
    EXPECT_EQ(parse_perturbation_mode(n), m);
  }
}

TEST(Perturb, CipRulesArePerturbedToo) {
  CipInstance c{"c", "a b", "c d", "e f", "g h", true,
                {rule("g h", Relation::kXReact, "nice", Relevance::kRelevant)}};
  const auto y = apply_perturbation(c, spec(PerturbationMode::kReplaceRelevant), kAntonyms);
  EXPECT_EQ(y.rules[0].tail, "mean");
}

struct Small {
  Vocabulary vocab;
  ModelConfig config;
};

Small small_model_setup(const AlphaNliInstance& x) {
  std::vector<std::string> texts;
  collect_texts(std::vector<AlphaNliInstance>{x}, texts);
  texts.push_back("not mean");
  Small s{Vocabulary::build(texts, 1), {}};
  s.config.d_model = 8;
  s.config.n_heads = 2;
  s.config.ctx_layers = 1;
  s.config.know_layers = 1;
  s.config.reason_layers = 2;
  s.config.d_ff = 16;
  s.config.vocab_size = s.vocab.size();
  s.config.max_positions = 32;
  s.config.knowledge_max_positions = 64;
  s.config.init_std = 0.3;
  return s;
}

TEST(Inspect, MassesAreNormalizedPerOption) {
  const auto x = labeled();
  const auto s = small_model_setup(x);
  MhkaModel<double> m(s.config, 3);
  const auto reports = inspect(m, s.vocab, x);
  ASSERT_EQ(reports.size(), 2u);
  for (std::size_t o = 0; o < 2; ++o) {
    EXPECT_EQ(reports[o].option, static_cast<int>(o + 1));
    EXPECT_EQ(reports[o].instance_id, "q");
    ASSERT_EQ(reports[o].rules.size(), x.rules[o].size());
    double total = 0;
    for (const auto& r : reports[o].rules) {
      EXPECT_GT(r.attention_mass, 0.0);
      EXPECT_TRUE(std::isfinite(r.similarity));
      total += r.attention_mass;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    const auto top = reports[o].top_rule();
    for (const auto& r : reports[o].rules) {
      EXPECT_LE(r.attention_mass, reports[o].rules[top].attention_mass);
    }
    const auto recs = reports[o].records();
    ASSERT_EQ(recs.size(), x.rules[o].size());
    EXPECT_EQ(recs[0]["relation"], relation_name(x.rules[o][0].relation));
    EXPECT_TRUE(recs[0].contains("relevance"));
  }
}

TEST(Inspect, SingleRuleGetsAllMass) {
  auto x = labeled();
  x.rules[0] = {x.rules[0][0]};
  x.rules[1] = {x.rules[1][0], x.rules[1][0]};
  const auto s = small_model_setup(x);
  MhkaModel<double> m(s.config, 4);
  const auto reports = inspect(m, s.vocab, x);
  EXPECT_DOUBLE_EQ(reports[0].rules[0].attention_mass, 1.0);
  ASSERT_EQ(reports[1].rules.size(), 2u);
  EXPECT_NEAR(reports[1].rules[0].attention_mass + reports[1].rules[1].attention_mass, 1.0,
              1e-12);
}

TEST(Inspect, RequiresMhkaModelAndRules) {
  auto x = labeled();
  auto s = small_model_setup(x);
  MhkaModel<double> m(s.config, 5);
  x.rules[0].clear();
  EXPECT_EQ(kind_of([&] { inspect(m, s.vocab, x); }), ErrorKind::kContract);
  s.config.variant = ModelVariant::kBlind;
  MhkaModel<double> blind(s.config, 5);
  EXPECT_EQ(kind_of([&] { inspect(blind, s.vocab, labeled()); }), ErrorKind::kContract);
}

TEST(Experiment, EmptyKnowledgeStillEvaluates) {
  const auto x = labeled();
  const auto s = small_model_setup(x);
  MhkaModel<double> m(s.config, 6);
  auto drop_all = spec(PerturbationMode::kDropRandom);
  drop_all.k = 1000;
  auto none = spec(PerturbationMode::kDropRandom);
  none.k = 0;
  const auto report = perturbation_experiment(m, s.vocab, std::vector<AlphaNliInstance>{x, x},
                                              {drop_all, none}, kAntonyms);
  ASSERT_EQ(report.rows.size(), 2u);
  EXPECT_DOUBLE_EQ(report.rows[1].accuracy, report.baseline);
  EXPECT_DOUBLE_EQ(report.rows[1].delta, 0.0);
  EXPECT_DOUBLE_EQ(report.rows[0].delta, report.rows[0].accuracy - report.baseline);
}

TEST(Ablation, SkipsHeadCountsThatDoNotDivide) {
  const auto x = labeled();
  const auto s = small_model_setup(x);
  const auto data = encode_dataset(std::vector<AlphaNliInstance>{x}, s.vocab, s.config);
  TrainConfig t;
  t.epochs = 1;
  t.batch_size = 1;
  const auto cells = ablate_heads_layers<double>({1, 3}, {1}, data, data, s.config, t);
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_FALSE(cells[0].skipped);
  EXPECT_EQ(cells[0].heads, 1u);
  EXPECT_TRUE(cells[1].skipped);
  EXPECT_FALSE(cells[1].reason.empty());
}

}  // namespace
}  // namespace mhka
