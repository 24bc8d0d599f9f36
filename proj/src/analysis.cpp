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

#include "mhka/analysis.hpp"

#include <algorithm>
#include <set>

#include "mhka/error.hpp"
#include "mhka/parameters.hpp"

namespace mhka {
namespace {

constexpr std::pair<PerturbationMode, std::string_view> kModeNames[] = {
    {PerturbationMode::kRemoveIrrelevant, "remove_irrelevant"},
    {PerturbationMode::kRemoveRelevantAndPartial, "remove_relevant_and_partial"},
    {PerturbationMode::kReplaceRelevant, "replace_relevant"},
    {PerturbationMode::kDropRelations, "drop_relations"},
    {PerturbationMode::kDropRandom, "drop_random"},
};

bool uses_relevance(const PerturbationSpec& spec) {
  return spec.mode == PerturbationMode::kRemoveIrrelevant ||
         spec.mode == PerturbationMode::kRemoveRelevantAndPartial ||
         spec.mode == PerturbationMode::kReplaceRelevant ||
         (spec.mode == PerturbationMode::kDropRandom && spec.protect_relevant);
}

std::string replace_tail(const std::string& tail, const AntonymMap& antonyms) {
  if (auto it = antonyms.find(tail); it != antonyms.end()) return it->second;
  return std::string(kNegationMarker) + " " + tail;
}

std::vector<KnowledgeRule> perturb_rules(const std::vector<KnowledgeRule>& rules,
                                         const PerturbationSpec& spec,
                                         const AntonymMap& antonyms, const std::string& id,
                                         int option) {
  if (uses_relevance(spec)) {
    for (std::size_t i = 0; i < rules.size(); ++i) {
      if (!rules[i].relevance) {
        fail(ErrorKind::kSpec, std::string(perturbation_mode_name(spec.mode)) +
                                   " needs relevance labels; instance " + id + " option " +
                                   std::to_string(option) + " rule " + std::to_string(i) +
                                   " has none");
      }
    }
  }
  std::vector<KnowledgeRule> out;
  switch (spec.mode) {
    case PerturbationMode::kRemoveIrrelevant:
      for (const auto& r : rules) {
        if (*r.relevance != Relevance::kIrrelevant) out.push_back(r);
      }
      return out;
    case PerturbationMode::kRemoveRelevantAndPartial:
      for (const auto& r : rules) {
        if (*r.relevance == Relevance::kIrrelevant) out.push_back(r);
      }
      return out;
    case PerturbationMode::kReplaceRelevant:
      out = rules;
      for (auto& r : out) {
        if (*r.relevance == Relevance::kRelevant) r.tail = replace_tail(r.tail, antonyms);
      }
      return out;
    case PerturbationMode::kDropRelations: {
      const auto& set = *spec.relation_set;
      for (const auto& r : rules) {
        if (std::find(set.begin(), set.end(), r.relation) == set.end()) out.push_back(r);
      }
      return out;
    }
    case PerturbationMode::kDropRandom: {
      std::vector<std::size_t> candidates;
      for (std::size_t i = 0; i < rules.size(); ++i) {
        if (!spec.protect_relevant || *rules[i].relevance != Relevance::kRelevant) {
          candidates.push_back(i);
        }
      }
      Rng rng(mix_seed(spec.seed, fnv1a(id), static_cast<std::uint64_t>(option)));
      std::shuffle(candidates.begin(), candidates.end(), rng);
      candidates.resize(std::min(*spec.k, candidates.size()));
      const std::set<std::size_t> dropped(candidates.begin(), candidates.end());
      for (std::size_t i = 0; i < rules.size(); ++i) {
        if (!dropped.count(i)) out.push_back(rules[i]);
      }
      return out;
    }
  }
  return out;
}

}  // namespace

std::string_view perturbation_mode_name(PerturbationMode mode) {
  for (const auto& [m, name] : kModeNames) {
    if (m == mode) return name;
  }
  return "unknown";
}

PerturbationMode parse_perturbation_mode(std::string_view name) {
  for (const auto& [m, n] : kModeNames) {
    if (n == name) return m;
  }
  fail(ErrorKind::kSpec, "unknown perturbation mode '" + std::string(name) + "'");
}

void PerturbationSpec::validate() const {
  if (mode == PerturbationMode::kDropRelations && !relation_set) {
    fail(ErrorKind::kSpec, "drop_relations needs a relation set");
  }
  if (mode == PerturbationMode::kDropRandom && !k) {
    fail(ErrorKind::kSpec, "drop_random needs k");
  }
}

nlohmann::json PerturbationSpec::to_json() const {
  nlohmann::json j = {{"mode", perturbation_mode_name(mode)}, {"seed", seed}};
  if (relation_set) {
    auto& arr = j["relations"] = nlohmann::json::array();
    for (Relation r : *relation_set) arr.push_back(relation_name(r));
  }
  if (k) j["k"] = *k;
  if (protect_relevant) j["protect_relevant"] = true;
  return j;
}

PerturbationSpec PerturbationSpec::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"mode", "seed", "relations", "k",
                                              "protect_relevant"};
  if (!j.is_object()) fail(ErrorKind::kSpec, "perturbation spec must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) fail(ErrorKind::kSpec, "unknown perturbation field '" + key + "'");
  }
  PerturbationSpec s;
  try {
    s.mode = parse_perturbation_mode(j.at("mode").get<std::string>());
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("relations")) {
      s.relation_set.emplace();
      for (const auto& r : j["relations"]) {
        s.relation_set->push_back(parse_relation(r.get<std::string>()));
      }
    }
    if (j.contains("k")) s.k = j["k"].get<std::size_t>();
    if (j.contains("protect_relevant")) s.protect_relevant = j["protect_relevant"].get<bool>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kSpec, std::string("bad perturbation spec: ") + e.what());
  }
  s.validate();
  return s;
}

AlphaNliInstance apply_perturbation(const AlphaNliInstance& instance,
                                    const PerturbationSpec& spec, const AntonymMap& antonyms) {
  spec.validate();
  AlphaNliInstance out = instance;
  for (int o = 0; o < 2; ++o) {
    out.rules[o] = perturb_rules(instance.rules[o], spec, antonyms, instance.id, o + 1);
  }
  return out;
}

CipInstance apply_perturbation(const CipInstance& instance, const PerturbationSpec& spec,
                               const AntonymMap& antonyms) {
  spec.validate();
  CipInstance out = instance;
  out.rules = perturb_rules(instance.rules, spec, antonyms, instance.id, 1);
  return out;
}

template <typename T, typename Instance>
PerturbationReport perturbation_experiment(const MhkaModel<T>& model, const Vocabulary& vocab,
                                           const std::vector<Instance>& data,
                                           const std::vector<PerturbationSpec>& specs,
                                           const AntonymMap& antonyms, int jobs) {
  for (const auto& s : specs) s.validate();
  PerturbationReport report;
  report.baseline = evaluate(model, encode_dataset(data, vocab, model.config()), jobs);
  for (const auto& spec : specs) {
    std::vector<Instance> perturbed;
    perturbed.reserve(data.size());
    for (const auto& x : data) perturbed.push_back(apply_perturbation(x, spec, antonyms));
    const double acc = evaluate(model, encode_dataset(perturbed, vocab, model.config()), jobs);
    report.rows.push_back({spec, acc, acc - report.baseline});
  }
  return report;
}

template <typename T>
std::vector<AblationCell> ablate_heads_layers(const std::vector<std::size_t>& head_counts,
                                              const std::vector<std::size_t>& layer_counts,
                                              const std::vector<EncodedExample>& train_set,
                                              const std::vector<EncodedExample>& dev_set,
                                              const ModelConfig& model_config,
                                              const TrainConfig& train_config) {
  std::vector<AblationCell> cells;
  for (std::size_t layers : layer_counts) {
    for (std::size_t heads : head_counts) {
      AblationCell cell;
      cell.heads = heads;
      cell.layers = layers;
      if (heads == 0 || model_config.d_model % heads != 0) {
        cell.skipped = true;
        cell.reason = "d_model " + std::to_string(model_config.d_model) +
                      " is not divisible by " + std::to_string(heads) + " heads";
        cells.push_back(cell);
        continue;
      }
      ModelConfig mc = model_config;
      mc.n_heads = heads;
      mc.ctx_layers = layers;
      if (mc.variant == ModelVariant::kMhka) {
        mc.know_layers = layers;
        mc.reason_layers = layers;
      }
      MhkaModel<T> model(mc, train_config.seed);
      cell.dev_accuracy = train(model, train_set, dev_set, train_config).best_dev;
      cells.push_back(cell);
    }
  }
  return cells;
}

std::size_t AttentionReport::top_rule() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < rules.size(); ++i) {
    if (rules[i].attention_mass > rules[best].attention_mass) best = i;
  }
  return best;
}

std::vector<nlohmann::json> AttentionReport::records() const {
  std::vector<nlohmann::json> out;
  for (const auto& r : rules) {
    nlohmann::json j = {{"instance_id", instance_id},
                        {"option", option},
                        {"rule_index", r.rule_index},
                        {"relation", relation_name(r.relation)},
                        {"attention_mass", r.attention_mass},
                        {"similarity", r.similarity}};
    if (r.relevance) j["relevance"] = relevance_name(*r.relevance);
    out.push_back(std::move(j));
  }
  return out;
}

template <typename T>
AttentionReport inspect_option(const MhkaModel<T>& model, const EncodedOption& option,
                               const std::vector<KnowledgeRule>& rules) {
  if (model.config().variant != ModelVariant::kMhka) {
    fail(ErrorKind::kContract, "inspection needs an mhka model");
  }
  const auto& spans = option.knowledge.rule_spans;
  if (spans.empty()) fail(ErrorKind::kContract, "inspection needs at least one encoded rule");
  if (spans.size() > rules.size()) {
    fail(ErrorKind::kContract, "more encoded spans than rules");
  }
  Graph<T> g(false);
  Var hx = model.encode_context(g, option.context.ids);
  Var hk = model.encode_knowledge_stack(g, option.knowledge.tokens.ids);
  const auto cell = model.reasoning_cell(g, hx, hk);
  const Tensor<T>& w = g.attention_weights(cell.attention.back());
  const Tensor<T>& K = g.value(hk);
  const Tensor<T>& R = g.value(cell.refined);
  const std::size_t heads = w.dim(0), nq = w.dim(1), nk = w.dim(2), d = K.cols();

  AttentionReport report;
  double total = 0;
  for (std::size_t r = 0; r < spans.size(); ++r) {
    const auto [begin, end] = spans[r];
    double mass = 0;
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t q = 0; q < nq; ++q) {
        const T* row = w.data() + (h * nq + q) * nk;
        for (std::size_t t = begin; t < end; ++t) mass += static_cast<double>(row[t]);
      }
    }
    mass /= static_cast<double>(heads * nq);
    double sim = 0;
    for (std::size_t c = 0; c < d; ++c) {
      double pooled = 0;
      for (std::size_t t = begin; t < end; ++t) pooled += static_cast<double>(K(t, c));
      sim += static_cast<double>(R(0, c)) * pooled / static_cast<double>(end - begin);
    }
    total += mass;
    report.rules.push_back({r, rules[r].relation, mass, sim, rules[r].relevance});
  }
  for (auto& r : report.rules) r.attention_mass /= total;
  return report;
}

template <typename T>
std::vector<AttentionReport> inspect(const MhkaModel<T>& model, const Vocabulary& vocab,
                                     const AlphaNliInstance& instance) {
  const auto ex = encode_example(instance, vocab, model.config());
  std::vector<AttentionReport> out;
  for (int o = 0; o < 2; ++o) {
    auto r = inspect_option(model, ex.options[o], instance.rules[o]);
    r.instance_id = instance.id;
    r.option = o + 1;
    out.push_back(std::move(r));
  }
  return out;
}

template <typename T>
std::vector<AttentionReport> inspect(const MhkaModel<T>& model, const Vocabulary& vocab,
                                     const CipInstance& instance) {
  const auto ex = encode_example(instance, vocab, model.config());
  auto r = inspect_option(model, ex.options[0], instance.rules);
  r.instance_id = instance.id;
  return {std::move(r)};
}

#define MHKA_INSTANTIATE(T)                                                                 \
  template PerturbationReport perturbation_experiment(                                      \
      const MhkaModel<T>&, const Vocabulary&, const std::vector<AlphaNliInstance>&,         \
      const std::vector<PerturbationSpec>&, const AntonymMap&, int);                        \
  template PerturbationReport perturbation_experiment(                                      \
      const MhkaModel<T>&, const Vocabulary&, const std::vector<CipInstance>&,              \
      const std::vector<PerturbationSpec>&, const AntonymMap&, int);                        \
  template std::vector<AblationCell> ablate_heads_layers<T>(                                \
      const std::vector<std::size_t>&, const std::vector<std::size_t>&,                     \
      const std::vector<EncodedExample>&, const std::vector<EncodedExample>&,               \
      const ModelConfig&, const TrainConfig&);                                              \
  template AttentionReport inspect_option(const MhkaModel<T>&, const EncodedOption&,        \
                                          const std::vector<KnowledgeRule>&);               \
  template std::vector<AttentionReport> inspect(const MhkaModel<T>&, const Vocabulary&,     \
                                                const AlphaNliInstance&);                   \
  template std::vector<AttentionReport> inspect(const MhkaModel<T>&, const Vocabulary&,     \
                                                const CipInstance&);

MHKA_INSTANTIATE(float)
MHKA_INSTANTIATE(double)
#undef MHKA_INSTANTIATE

}  // namespace mhka
