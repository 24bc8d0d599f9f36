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

#include "mhka/knowledge.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include "mhka/error.hpp"
#include "mhka/vocabulary.hpp"

namespace mhka {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string join(const std::vector<std::string>& toks, std::size_t begin,
                 std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (!out.empty()) out += ' ';
    out += toks[i];
  }
  return out;
}

const std::unordered_set<std::string>& verb_lexicon() {
  static const std::unordered_set<std::string> words = {
      // auxiliaries and copulas
      "am", "is", "are", "was", "were", "be", "been", "being", "has", "have",
      "had", "do", "does", "did", "will", "would", "can", "could", "shall",
      "should", "may", "might", "must",
      // contraction stems left by the tokenizer ("won't" -> won ' t)
      "won", "don", "didn", "doesn", "isn", "wasn", "weren", "aren", "couldn",
      "wouldn", "shouldn", "hasn", "haven", "hadn", "ain",
      // common irregular and frequent verbs
      "go", "goes", "went", "eat", "eats", "ate", "call", "calls", "get",
      "gets", "got", "make", "makes", "made", "take", "takes", "took", "see",
      "sees", "saw", "come", "comes", "came", "give", "gives", "gave", "find",
      "finds", "found", "know", "knows", "knew", "think", "thinks", "thought",
      "tell", "tells", "told", "become", "becomes", "became", "leave",
      "leaves", "left", "feel", "feels", "felt", "bring", "brings", "brought",
      "begin", "begins", "began", "keep", "keeps", "kept", "hold", "holds",
      "held", "write", "writes", "wrote", "stand", "stands", "stood", "hear",
      "hears", "heard", "let", "lets", "mean", "means", "meant", "meet",
      "meets", "met", "run", "runs", "ran", "pay", "pays", "paid", "sit",
      "sits", "sat", "speak", "speaks", "spoke", "lead", "leads", "led",
      "read", "reads", "grow", "grows", "grew", "lose", "loses", "lost",
      "fall", "falls", "fell", "send", "sends", "sent", "build", "builds",
      "built", "spend", "spends", "spent", "buy", "buys", "bought", "drive",
      "drives", "drove", "wear", "wears", "wore", "choose", "chooses",
      "chose", "win", "wins", "sing", "sang", "swim", "swam", "drink",
      "drank", "sleep", "slept", "catch", "caught", "teach", "taught",
      "fight", "fought", "sell", "sold", "break", "broke", "forget", "forgot",
      "want", "wants", "need", "needs", "like", "likes", "love", "loves",
      "hate", "hates", "decide", "decides", "try", "tries", "start",
      "starts", "help", "helps", "play", "plays", "work", "works", "walk",
      "walks", "talk", "talks", "ask", "asks", "open", "opens", "gain",
      "gains", "stop", "stops", "learn", "learns", "cook", "cooks", "bake",
      "bakes", "chat", "chats", "visit", "visits", "wait", "waits", "watch",
      "watches", "study", "studies", "clean", "cleans", "fix", "fixes",
      "wash", "washes", "paint", "paints", "climb", "climbs", "adopt",
      "adopts", "plant", "plants", "cry", "cries", "laugh", "laughs"};
  return words;
}

// -ed words that are rarely verbs.
const std::unordered_set<std::string>& ed_exceptions() {
  static const std::unordered_set<std::string> words = {
      "hundred", "sacred", "naked", "wicked", "speed", "seed", "breed",
      "weed", "greed", "sled", "shed", "bored", "tired", "red", "bed",
      "wed", "fed", "ted", "ned", "fred", "jared", "ahmed"};
  return words;
}

bool is_verb_like(const std::string& tok) {
  if (verb_lexicon().count(tok)) return true;
  return tok.size() >= 4 && tok.ends_with("ed") && !ed_exceptions().count(tok);
}

bool is_clause_break(const std::string& tok) {
  return tok == "and" || tok == "but" || tok == "then" || tok == "so" ||
         tok == "," || tok == ";";
}

bool is_word(const std::string& tok) {
  return std::any_of(tok.begin(), tok.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || (c & 0x80);
  });
}

}  // namespace

std::string_view relation_name(Relation r) {
  switch (r) {
    case Relation::kXIntent: return "xIntent";
    case Relation::kXNeed: return "xNeed";
    case Relation::kXAttr: return "xAttr";
    case Relation::kXReact: return "xReact";
    case Relation::kXWant: return "xWant";
    case Relation::kXEffect: return "xEffect";
    case Relation::kOReact: return "oReact";
    case Relation::kOWant: return "oWant";
    case Relation::kOEffect: return "oEffect";
  }
  fail(ErrorKind::kRelation, "unknown relation value");
}

Relation parse_relation(std::string_view name) {
  const std::string key = lower(name);
  for (Relation r : kAllRelations) {
    if (lower(relation_name(r)) == key) return r;
  }
  fail(ErrorKind::kRelation, "unknown relation '" + std::string(name) + "'");
}

std::string_view relation_template(Relation r) {
  switch (r) {
    case Relation::kXIntent: return "because PersonX wanted";
    case Relation::kXNeed: return "PersonX needed";
    case Relation::kXAttr: return "PersonX is seen as";
    case Relation::kXReact: return "PersonX feels";
    case Relation::kXWant: return "PersonX wants";
    case Relation::kXEffect: return "effect on PersonX";
    case Relation::kOReact: return "others feel";
    case Relation::kOWant: return "others wants";
    case Relation::kOEffect: return "effect on others";
  }
  fail(ErrorKind::kRelation, "unknown relation value");
}

std::string_view relevance_name(Relevance r) {
  switch (r) {
    case Relevance::kRelevant: return "relevant";
    case Relevance::kPartial: return "partial";
    case Relevance::kIrrelevant: return "irrelevant";
  }
  return "irrelevant";
}

Relevance parse_relevance(std::string_view name) {
  const std::string key = lower(name);
  if (key == "relevant") return Relevance::kRelevant;
  if (key == "partial" || key == "partially relevant") return Relevance::kPartial;
  if (key == "irrelevant") return Relevance::kIrrelevant;
  fail(ErrorKind::kParse, "unknown relevance '" + std::string(name) + "'");
}

std::vector<Event> extract_events(std::string_view sentence) {
  std::vector<std::string> toks;
  for (auto& t : tokenize(sentence)) {
    if (is_word(t) || t == ",") toks.push_back(std::move(t));
  }
  std::vector<Event> events;
  std::string last_subject;
  std::size_t start = 0;
  while (start < toks.size()) {
    std::size_t verb = toks.size();
    for (std::size_t i = start; i < toks.size(); ++i) {
      if (is_verb_like(toks[i])) {
        verb = i;
        break;
      }
    }
    if (verb == toks.size()) break;
    // The clause runs until a break token that is followed by another verb.
    std::size_t end = toks.size();
    for (std::size_t i = verb + 1; i < toks.size(); ++i) {
      if (!is_clause_break(toks[i])) continue;
      bool later_verb = false;
      for (std::size_t j = i + 1; j < toks.size(); ++j) {
        later_verb = later_verb || is_verb_like(toks[j]);
      }
      if (later_verb) {
        end = i;
        break;
      }
    }
    Event e;
    std::vector<std::string> subject, args;
    for (std::size_t i = start; i < verb; ++i) {
      if (toks[i] != "," && !is_clause_break(toks[i])) subject.push_back(toks[i]);
    }
    for (std::size_t i = verb + 1; i < end; ++i) {
      if (toks[i] != ",") args.push_back(toks[i]);
    }
    e.subject = subject.empty() ? last_subject : join(subject, 0, subject.size());
    e.predicate = toks[verb];
    e.arguments = join(args, 0, args.size());
    last_subject = e.subject;
    events.push_back(std::move(e));
    start = end + 1;
  }
  return events;
}

std::string verbalize_rule(const KnowledgeRule& rule) {
  const std::string_view tmpl = relation_template(rule.relation);
  std::string subject;
  if (auto events = extract_events(rule.head); !events.empty()) {
    subject = events.front().subject;
  }
  std::vector<std::string> toks = tokenize(rule.head);
  while (!toks.empty() && !is_word(toks.back())) toks.pop_back();
  for (auto& t : tokenize(tmpl)) toks.push_back(std::move(t));
  for (auto& t : tokenize(rule.tail)) toks.push_back(std::move(t));
  std::string out;
  for (const auto& t : toks) {
    if (!out.empty()) out += ' ';
    out += (t == "personx" && !subject.empty()) ? subject : t;
  }
  return out;
}

AntonymMap load_antonyms(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kFile, "cannot open antonym lexicon " + path.string());
  AntonymMap map;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      fail(ErrorKind::kParse, path.string() + ":" + std::to_string(lineno) +
                                  ": expected word<TAB>antonym");
    }
    const std::string a = line.substr(0, tab), b = line.substr(tab + 1);
    map.emplace(a, b);
    map.emplace(b, a);
  }
  return map;
}

void write_antonyms(const std::filesystem::path& path, const AntonymMap& pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kFile, "cannot write " + path.string());
  for (const auto& [a, b] : pairs) out << a << '\t' << b << '\n';
}

}  // namespace mhka
