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

#include "mhka/synth.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <tuple>

#include <json.hpp>

#include "mhka/error.hpp"
#include "mhka/parameters.hpp"

namespace mhka {
namespace {

constexpr const char* kNames[] = {
    "Dotty", "Bob",  "Anna", "Carl", "Dina", "Ezra", "Fay",  "Gus",  "Hana", "Ivan",
    "Jade",  "Kurt", "Lena", "Milo", "Nora", "Otto", "Pia",  "Rex",  "Sara", "Theo"};
constexpr const char* kVerbs[] = {
    "cooked",  "painted", "cleaned", "visited", "fixed",   "washed",  "called",
    "played",  "watched", "planted", "opened",  "climbed", "baked",   "mailed",
    "carried", "sorted",  "hugged",  "kicked",  "lifted",  "packed"};
constexpr const char* kObjects[] = {
    "bread", "letters", "cars",  "fences", "shirts", "songs", "apples",
    "boats", "games",   "walls", "books",  "dogs",   "bikes", "cakes",
    "kites", "shoes",   "roofs", "lamps",  "chairs", "boxes"};
constexpr const char* kAdjectives[] = {
    "grumpy", "sleepy",   "bored",  "busy",  "quiet",  "nervous", "cheerful",
    "restless", "lonely", "curious", "clumsy", "eager", "shy",     "moody",
    "polite", "silly",    "strict", "gentle", "sloppy", "jolly"};
constexpr const char* kNeutralTails[] = {
    "food",  "sleep", "money",  "music",   "help",   "rest",   "water",
    "praise", "news", "advice", "tools",   "time",   "space",  "company",
    "light", "shelter", "change", "exercise", "pretrained", "coffee"};
constexpr std::pair<const char*, const char*> kOutcomes[] = {
    {"better", "worse"}, {"happy", "sad"},       {"calm", "angry"},
    {"well", "sick"},    {"proud", "ashamed"},   {"relieved", "worried"},
    {"rested", "tired"}, {"brave", "scared"},    {"warm", "cold"},
    {"rich", "poor"}};

template <std::size_t N>
std::vector<std::string> pool(const char* const (&words)[N], std::size_t cap) {
  return {words, words + std::min(N, cap)};
}

template <typename C>
const auto& pick(const C& items, Rng& rng) {
  return items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
}

struct Pools {
  std::vector<std::string> names, verbs, objects, adjectives, tails;
  std::vector<std::string> positive, negative;
  std::vector<Relation> distractor_relations;

  explicit Pools(std::size_t cap)
      : names(pool(kNames, cap)),
        verbs(pool(kVerbs, cap)),
        objects(pool(kObjects, cap)),
        adjectives(pool(kAdjectives, cap)),
        tails(pool(kNeutralTails, cap)) {
    for (const auto& [a, b] : kOutcomes) {
      positive.push_back(a);
      negative.push_back(b);
    }
    for (Relation r : kAllRelations) {
      if (r != Relation::kXReact) distractor_relations.push_back(r);
    }
  }

  std::string feeling(bool pos, Rng& rng) const { return pick(pos ? positive : negative, rng); }

  std::string event(const std::string& name, Rng& rng) const {
    return name + " " + pick(verbs, rng) + " " + pick(objects, rng) + ".";
  }
};

std::pair<std::string, std::string> two_events(const Pools& p, const std::string& name,
                                               Rng& rng) {
  std::string a = p.event(name, rng), b = p.event(name, rng);
  while (b == a) b = p.event(name, rng);
  return {a, b};
}

// Planted rule (if any) plus distinct distractors over `heads`, shuffled.
std::pair<std::vector<KnowledgeRule>, int> make_rules(
    const Pools& p, const std::vector<std::string>& heads,
    const KnowledgeRule* decisive, std::size_t count, Rng& rng) {
  std::vector<KnowledgeRule> rules;
  std::set<std::tuple<std::string, Relation, std::string>> used;
  if (decisive) rules.push_back(*decisive);
  while (rules.size() < count) {
    KnowledgeRule r{pick(heads, rng), pick(p.distractor_relations, rng), pick(p.tails, rng),
                    Relevance::kIrrelevant};
    if (!used.emplace(r.head, r.relation, r.tail).second) continue;
    rules.push_back(std::move(r));
  }
  std::vector<std::size_t> order(rules.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<KnowledgeRule> shuffled;
  int index = -1;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (decisive && order[i] == 0) index = static_cast<int>(i);
    shuffled.push_back(std::move(rules[order[i]]));
  }
  return {std::move(shuffled), index};
}

std::string outcome_sentence(const std::string& name, const std::string& w) {
  return name + " felt " + w + " afterwards.";
}

}  // namespace

void SynthConfig::validate() const {
  if (n_instances < 1) fail(ErrorKind::kConfig, "synthetic suite needs at least one instance");
  if (rules_per_instance < 1) fail(ErrorKind::kConfig, "rules_per_instance must be at least 1");
  if (!(fraction_decisive > 0.0 && fraction_decisive <= 1.0)) {
    fail(ErrorKind::kConfig, "fraction_decisive must lie in (0, 1]");
  }
  if (vocab_size < 2) {
    fail(ErrorKind::kConfig, "vocab_size " + std::to_string(vocab_size) +
                                 " leaves no room for distinct events");
  }
  // Distractors are distinct (head, relation, tail) triples over two heads.
  const std::size_t tails = std::min(vocab_size, std::size(kNeutralTails));
  const std::size_t room = 2 * 8 * tails;
  if (rules_per_instance > room) {
    fail(ErrorKind::kConfig, "vocab_size " + std::to_string(vocab_size) + " supports at most " +
                                 std::to_string(room) + " rules per instance");
  }
}

AntonymMap synth_antonyms() {
  AntonymMap map;
  for (const auto& [a, b] : kOutcomes) {
    map.emplace(a, b);
    map.emplace(b, a);
  }
  return map;
}

SynthAlphaNli synth_alpha_nli(const SynthConfig& config) {
  config.validate();
  const Pools p(config.vocab_size);
  SynthAlphaNli suite;
  for (std::size_t i = 0; i < config.n_instances; ++i) {
    Rng rng(mix_seed(config.seed, 0x616e6c69ULL, i));
    AlphaNliInstance x;
    x.id = config.id_prefix + "-" + std::to_string(i);
    const std::string name = pick(p.names, rng);
    const std::string w = p.feeling(true, rng);
    x.o1 = name + " was " + pick(p.adjectives, rng) + ".";
    std::tie(x.h1, x.h2) = two_events(p, name, rng);
    x.o2 = outcome_sentence(name, w);
    x.gold = std::bernoulli_distribution(0.5)(rng) ? 2 : 1;
    const bool planted = std::uniform_real_distribution<double>(0, 1)(rng) <
                         config.fraction_decisive;
    std::array<int, 2> where{-1, -1};
    for (int o = 0; o < 2; ++o) {
      const std::string& h = o == 0 ? x.h1 : x.h2;
      KnowledgeRule d{h, Relation::kXReact, p.feeling(x.gold == o + 1, rng),
                      Relevance::kRelevant};
      auto [rules, index] = make_rules(p, {h, x.o1}, planted ? &d : nullptr,
                                       config.rules_per_instance, rng);
      x.rules[o] = std::move(rules);
      where[o] = index;
    }
    suite.instances.push_back(std::move(x));
    suite.decisive.push_back(where);
  }
  return suite;
}

SynthCip synth_cip(const SynthConfig& config) {
  config.validate();
  const Pools p(config.vocab_size);
  SynthCip suite;
  for (std::size_t i = 0; i < config.n_instances; ++i) {
    Rng rng(mix_seed(config.seed, 0x636970ULL, i));
    CipInstance x;
    x.id = config.id_prefix + "-" + std::to_string(i);
    const std::string name = pick(p.names, rng);
    const std::string w = p.feeling(true, rng);
    x.s1 = name + " was " + pick(p.adjectives, rng) + ".";
    std::tie(x.s2, x.s2_cf) = two_events(p, name, rng);
    x.s3 = outcome_sentence(name, w);
    x.gold_yes = std::bernoulli_distribution(0.5)(rng);
    const bool planted = std::uniform_real_distribution<double>(0, 1)(rng) <
                         config.fraction_decisive;
    KnowledgeRule d{x.s2_cf, Relation::kXReact, p.feeling(x.gold_yes, rng),
                    Relevance::kRelevant};
    auto [rules, index] = make_rules(p, {x.s2, x.s2_cf}, planted ? &d : nullptr,
                                     config.rules_per_instance, rng);
    x.rules = std::move(rules);
    suite.instances.push_back(std::move(x));
    suite.decisive.push_back(index);
  }
  return suite;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kFile, "cannot write " + path.string());
  return out;
}

std::string decisive_line(const std::string& id, int option, int index) {
  return nlohmann::json{{"id", id}, {"option", option}, {"rule_index", index}}.dump();
}

}  // namespace

void write_decisive(const std::filesystem::path& path, const SynthAlphaNli& suite) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < suite.instances.size(); ++i) {
    for (int o = 0; o < 2; ++o) {
      out << decisive_line(suite.instances[i].id, o + 1, suite.decisive[i][o]) << '\n';
    }
  }
}

void write_decisive(const std::filesystem::path& path, const SynthCip& suite) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < suite.instances.size(); ++i) {
    out << decisive_line(suite.instances[i].id, 1, suite.decisive[i]) << '\n';
  }
}

std::vector<DecisiveRecord> read_decisive(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kFile, "cannot open " + path.string());
  std::vector<DecisiveRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("option").get<int>(),
                     j.at("rule_index").get<int>()});
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kParse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace mhka
