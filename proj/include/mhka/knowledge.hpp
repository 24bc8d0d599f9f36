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

// If-then knowledge rules over the nine ATOMIC relation dimensions, their
// template verbalization, and a heuristic event extractor that supplies the
// logical subject used for PersonX substitution.

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mhka {

enum class Relation {
  kXIntent,
  kXNeed,
  kXAttr,
  kXReact,
  kXWant,
  kXEffect,
  kOReact,
  kOWant,
  kOEffect,
};

inline constexpr std::array<Relation, 9> kAllRelations = {
    Relation::kXIntent, Relation::kXNeed,   Relation::kXAttr,
    Relation::kXReact,  Relation::kXWant,   Relation::kXEffect,
    Relation::kOReact,  Relation::kOWant,   Relation::kOEffect};

std::string_view relation_name(Relation r);
// Accepts the canonical names ("xIntent", ...), case-insensitively.
Relation parse_relation(std::string_view name);
// Textual description, e.g. "because PersonX wanted" for xIntent.
std::string_view relation_template(Relation r);

enum class Relevance { kRelevant, kPartial, kIrrelevant };

std::string_view relevance_name(Relevance r);
Relevance parse_relevance(std::string_view name);

struct KnowledgeRule {
  std::string head;
  Relation relation = Relation::kXIntent;
  std::string tail;
  std::optional<Relevance> relevance;
};

struct Event {
  std::string subject;
  std::string predicate;
  std::string arguments;
};

// Best-effort who-did-what split. The subject is the token run before the
// first verb-like token, the predicate is that token, and the rest are the
// arguments. Clauses joined by and/but/then/so after a verb start a new
// event. Verbless input yields no events.
std::vector<Event> extract_events(std::string_view sentence);

// "head template tail", lowercased and tokenized, with personx replaced by
// the subject of the head's first event when there is one.
std::string verbalize_rule(const KnowledgeRule& rule);

// Word -> antonym lexicon, one "word<TAB>antonym" pair per line. Pairs are
// read in both directions; '#' starts a comment line.
using AntonymMap = std::map<std::string, std::string, std::less<>>;

AntonymMap load_antonyms(const std::filesystem::path& path);
void write_antonyms(const std::filesystem::path& path, const AntonymMap& pairs);

}  // namespace mhka
