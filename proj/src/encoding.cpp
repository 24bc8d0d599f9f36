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

#include "mhka/encoding.hpp"

#include <variant>

#include "mhka/error.hpp"

namespace mhka {
namespace {

// A truncation unit: one text span that may occur several times in the
// template (CIP repeats s1 and s3), shortened in lockstep.
struct Unit {
  std::vector<int> ids;
  std::size_t occurrences = 1;
};

using Piece = std::variant<int, std::size_t>;  // literal id, or unit index

std::vector<int> span_ids(const std::string& text, const Vocabulary& vocab,
                          const char* field) {
  std::vector<int> ids = vocab.encode(text);
  if (ids.empty()) {
    fail(ErrorKind::kEncoding, std::string("field ") + field + " has no tokens");
  }
  return ids;
}

TokenSequence assemble(std::vector<Unit> units, const std::vector<Piece>& layout,
                       std::size_t max_positions) {
  auto total = [&] {
    std::size_t n = 0;
    for (const auto& p : layout) {
      n += std::holds_alternative<int>(p) ? 1 : units[std::get<std::size_t>(p)].ids.size();
    }
    return n;
  };
  while (total() > max_positions) {
    std::size_t best = units.size();
    for (std::size_t u = 0; u < units.size(); ++u) {
      if (best == units.size() || units[u].ids.size() >= units[best].ids.size()) best = u;
    }
    if (units[best].ids.size() <= 1) {
      fail(ErrorKind::kEncoding, "sequence of " + std::to_string(total()) +
                                     " tokens cannot fit " +
                                     std::to_string(max_positions) + " positions");
    }
    units[best].ids.pop_back();
  }
  TokenSequence seq;
  for (const auto& p : layout) {
    if (std::holds_alternative<int>(p)) {
      seq.ids.push_back(std::get<int>(p));
    } else {
      const auto& ids = units[std::get<std::size_t>(p)].ids;
      seq.ids.insert(seq.ids.end(), ids.begin(), ids.end());
    }
  }
  return seq;
}

}  // namespace

void check_framing(const TokenSequence& seq) {
  if (seq.ids.size() < 2 || seq.ids.front() != kClsId || seq.ids.back() != kSepId) {
    fail(ErrorKind::kContract, "sequence must start with [CLS] and end with [SEP]");
  }
  bool seen_pad = false;
  for (int id : seq.ids) {
    if (id == kPadId) {
      seen_pad = true;
    } else if (seen_pad) {
      fail(ErrorKind::kContract, "[PAD] before content");
    }
  }
  if (!seq.segments.empty() && seq.segments.size() != seq.ids.size()) {
    fail(ErrorKind::kContract, "segment tags do not match the sequence length");
  }
}

TokenSequence encode_alpha_nli(const AlphaNliInstance& instance, int hyp_index,
                               const Vocabulary& vocab, std::size_t max_positions) {
  if (hyp_index != 1 && hyp_index != 2) {
    fail(ErrorKind::kEncoding, "hypothesis index must be 1 or 2");
  }
  std::vector<Unit> units = {
      {span_ids(instance.o1, vocab, "obs1")},
      {span_ids(instance.hypothesis(hyp_index), vocab, hyp_index == 1 ? "hyp1" : "hyp2")},
      {span_ids(instance.o2, vocab, "obs2")}};
  const std::vector<Piece> layout = {kClsId, std::size_t{0}, std::size_t{1},
                                     kSepId, std::size_t{2}, kSepId};
  return assemble(std::move(units), layout, max_positions);
}

TokenSequence encode_cip(const CipInstance& instance, const Vocabulary& vocab,
                         std::size_t max_positions) {
  std::vector<Unit> units = {{span_ids(instance.s1, vocab, "s1"), 2},
                             {span_ids(instance.s2, vocab, "s2"), 1},
                             {span_ids(instance.s3, vocab, "s3"), 2},
                             {span_ids(instance.s2_cf, vocab, "s2_cf"), 1}};
  const std::vector<Piece> layout = {
      kClsId,         std::size_t{0}, std::size_t{1}, std::size_t{2}, kSepId,
      std::size_t{0}, std::size_t{3}, std::size_t{2}, kSepId};
  return assemble(std::move(units), layout, max_positions);
}

KnowledgeSequence encode_knowledge(const std::vector<std::string>& verbalized_rules,
                                   const Vocabulary& vocab, std::size_t max_positions) {
  if (max_positions == 0) fail(ErrorKind::kEncoding, "knowledge length limit is zero");
  KnowledgeSequence out;
  std::size_t rule_index = 0;
  for (const auto& text : verbalized_rules) {
    std::vector<int> ids = vocab.encode(text);
    const int tag = static_cast<int>(rule_index++);
    if (ids.empty()) continue;
    const std::size_t needed = ids.size() + (out.tokens.ids.empty() ? 0 : 1);
    if (out.tokens.ids.size() + needed > max_positions) {
      out.rules_truncated = verbalized_rules.size() - (rule_index - 1);
      break;
    }
    if (!out.tokens.ids.empty()) {
      out.tokens.ids.push_back(kSepId);
      out.tokens.segments.push_back(-1);
    }
    const std::size_t begin = out.tokens.ids.size();
    out.tokens.ids.insert(out.tokens.ids.end(), ids.begin(), ids.end());
    out.tokens.segments.insert(out.tokens.segments.end(), ids.size(), tag);
    out.rule_spans.emplace_back(begin, out.tokens.ids.size());
  }
  if (out.tokens.ids.empty()) {
    out.tokens.ids = {kNoKnowId};
    out.tokens.segments = {-1};
  }
  return out;
}

KnowledgeSequence encode_rules(const std::vector<KnowledgeRule>& rules,
                               const Vocabulary& vocab, std::size_t max_positions) {
  std::vector<std::string> texts;
  texts.reserve(rules.size());
  for (const auto& r : rules) texts.push_back(verbalize_rule(r));
  return encode_knowledge(texts, vocab, max_positions);
}

TokenSequence encode_joint(const TokenSequence& task,
                           const KnowledgeSequence& knowledge,
                           std::size_t max_positions) {
  check_framing(task);
  const std::size_t body = task.ids.size() - 1;  // task without its [CLS]
  // Keep the longest prefix of whole rules that fits.
  std::size_t keep = knowledge.rule_spans.size();
  auto length_with = [&](std::size_t rules) {
    const std::size_t k = rules == 0 ? 1 : knowledge.rule_spans[rules - 1].second;
    return 1 + k + 1 + body;
  };
  while (keep > 0 && length_with(keep) > max_positions) --keep;
  if (length_with(keep) > max_positions) {
    fail(ErrorKind::kEncoding, "task input leaves no room for knowledge within " +
                                   std::to_string(max_positions) + " positions");
  }
  TokenSequence seq;
  seq.ids.push_back(kClsId);
  if (keep == 0) {
    seq.ids.push_back(kNoKnowId);
  } else {
    const auto end = knowledge.rule_spans[keep - 1].second;
    seq.ids.insert(seq.ids.end(), knowledge.tokens.ids.begin(),
                   knowledge.tokens.ids.begin() + static_cast<std::ptrdiff_t>(end));
  }
  seq.ids.push_back(kSepId);
  seq.ids.insert(seq.ids.end(), task.ids.begin() + 1, task.ids.end());
  return seq;
}

}  // namespace mhka
