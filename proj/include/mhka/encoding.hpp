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

// Assembly of model input sequences.
//
//   alpha-NLI option i   [CLS] O1 Hi [SEP] O2 [SEP]
//   CIP                  [CLS] s1 s2 s3 [SEP] s1 s2' s3 [SEP]
//   knowledge            r1 [SEP] r2 [SEP] ... rn        ([NOKNOW] if empty)
//   joint baseline       [CLS] knowledge [SEP] task-input-without-[CLS]

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mhka/tasks.hpp"
#include "mhka/vocabulary.hpp"

namespace mhka {

inline constexpr std::size_t kDefaultMaxPositions = 128;
inline constexpr std::size_t kDefaultKnowledgeMaxPositions = 256;

struct TokenSequence {
  std::vector<int> ids;
  // Optional per-token tags. Knowledge sequences tag each token with the
  // index of the rule it came from, -1 for separators.
  std::vector<int> segments;

  std::size_t size() const { return ids.size(); }
};

struct KnowledgeSequence {
  TokenSequence tokens;
  // [begin, end) token span of every encoded rule, in rule order.
  std::vector<std::pair<std::size_t, std::size_t>> rule_spans;
  // Rules dropped from the end to respect the length limit.
  std::size_t rules_truncated = 0;
};

// Throws a contract error unless the sequence starts with [CLS], ends with
// [SEP] and has no [PAD] before content.
void check_framing(const TokenSequence& seq);

// Long spans lose trailing tokens first (ties: the later span).
TokenSequence encode_alpha_nli(const AlphaNliInstance& instance, int hyp_index,
                               const Vocabulary& vocab,
                               std::size_t max_positions = kDefaultMaxPositions);

TokenSequence encode_cip(const CipInstance& instance, const Vocabulary& vocab,
                         std::size_t max_positions = kDefaultMaxPositions);

// Whole rules are dropped from the end on overflow, never cut mid-rule.
KnowledgeSequence encode_knowledge(
    const std::vector<std::string>& verbalized_rules, const Vocabulary& vocab,
    std::size_t max_positions = kDefaultKnowledgeMaxPositions);

KnowledgeSequence encode_rules(const std::vector<KnowledgeRule>& rules,
                               const Vocabulary& vocab,
                               std::size_t max_positions = kDefaultKnowledgeMaxPositions);

TokenSequence encode_joint(const TokenSequence& task,
                           const KnowledgeSequence& knowledge,
                           std::size_t max_positions = kDefaultMaxPositions);

}  // namespace mhka
