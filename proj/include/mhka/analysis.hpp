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

// Knowledge perturbation, head/layer ablation and reasoning-cell inspection.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mhka/knowledge.hpp"
#include "mhka/model.hpp"
#include "mhka/trainer.hpp"

namespace mhka {

enum class PerturbationMode {
  kRemoveIrrelevant,
  kRemoveRelevantAndPartial,
  kReplaceRelevant,
  kDropRelations,
  kDropRandom,
};

std::string_view perturbation_mode_name(PerturbationMode mode);
PerturbationMode parse_perturbation_mode(std::string_view name);

struct PerturbationSpec {
  PerturbationMode mode = PerturbationMode::kDropRandom;
  std::optional<std::vector<Relation>> relation_set;  // drop_relations
  std::optional<std::size_t> k;                       // drop_random
  std::uint64_t seed = 0;
  // drop_random only: never pick rules labeled relevant.
  bool protect_relevant = false;

  void validate() const;
  nlohmann::json to_json() const;
  static PerturbationSpec from_json(const nlohmann::json& j);
};

// Negation marker used by replace_relevant when a tail has no antonym.
inline constexpr std::string_view kNegationMarker = "not";

// Rewrites the knowledge rules of every option; task text is untouched.
// drop_random removes min(k, candidates) rules per option, drawn from the
// spec seed, the instance id and the option.
AlphaNliInstance apply_perturbation(const AlphaNliInstance& instance,
                                    const PerturbationSpec& spec, const AntonymMap& antonyms);
CipInstance apply_perturbation(const CipInstance& instance, const PerturbationSpec& spec,
                               const AntonymMap& antonyms);

struct PerturbationRow {
  PerturbationSpec spec;
  double accuracy = 0;
  double delta = 0;  // accuracy minus the unperturbed accuracy
};

struct PerturbationReport {
  double baseline = 0;
  std::vector<PerturbationRow> rows;
};

template <typename T, typename Instance>
PerturbationReport perturbation_experiment(const MhkaModel<T>& model, const Vocabulary& vocab,
                                           const std::vector<Instance>& data,
                                           const std::vector<PerturbationSpec>& specs,
                                           const AntonymMap& antonyms, int jobs = 0);

struct AblationCell {
  std::size_t heads = 0;
  std::size_t layers = 0;
  bool skipped = false;
  std::string reason;  // why a cell was skipped
  double dev_accuracy = 0;
};

// One model per (heads, layers) cell; `layers` sets the context, knowledge
// and reasoning depths alike. Every cell trains from the same seed. Head
// counts that do not divide d_model are skipped and flagged.
template <typename T>
std::vector<AblationCell> ablate_heads_layers(const std::vector<std::size_t>& head_counts,
                                              const std::vector<std::size_t>& layer_counts,
                                              const std::vector<EncodedExample>& train_set,
                                              const std::vector<EncodedExample>& dev_set,
                                              const ModelConfig& model_config,
                                              const TrainConfig& train_config);

struct RuleAttention {
  std::size_t rule_index = 0;
  Relation relation = Relation::kXIntent;
  double attention_mass = 0;
  double similarity = 0;
  std::optional<Relevance> relevance;
};

// Attention mass: final reasoning layer, summed over each rule's token span,
// averaged over heads and query positions, normalized across rules.
// Similarity: dot product of the refined [CLS] state with the rule's
// mean-pooled knowledge-encoder output. Rules cut by the length limit are
// not reported.
struct AttentionReport {
  std::string instance_id;
  int option = 1;
  std::vector<RuleAttention> rules;

  // Index into `rules` of the largest mass (ties: lower index).
  std::size_t top_rule() const;
  // One line per rule.
  std::vector<nlohmann::json> records() const;
};

// Requires a kMhka model and at least one encoded rule.
template <typename T>
AttentionReport inspect_option(const MhkaModel<T>& model, const EncodedOption& option,
                               const std::vector<KnowledgeRule>& rules);

// One report per option.
template <typename T>
std::vector<AttentionReport> inspect(const MhkaModel<T>& model, const Vocabulary& vocab,
                                     const AlphaNliInstance& instance);
template <typename T>
std::vector<AttentionReport> inspect(const MhkaModel<T>& model, const Vocabulary& vocab,
                                     const CipInstance& instance);

}  // namespace mhka
