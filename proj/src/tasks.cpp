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

#include "mhka/tasks.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <unordered_map>

#include <json.hpp>

#include "mhka/error.hpp"
#include "mhka/parameters.hpp"

namespace mhka {
namespace {

using nlohmann::json;

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

void for_each_record(const std::filesystem::path& path,
                     const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kFile, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorKind::kParse, where(path, line_no) + "malformed record: " + e.what());
    }
    if (!record.is_object()) {
      fail(ErrorKind::kParse, where(path, line_no) + "record is not an object");
    }
    try {
      fn(record, line_no);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kParse || e.kind() == ErrorKind::kLabel ||
          e.kind() == ErrorKind::kRelation || e.kind() == ErrorKind::kData) {
        // Re-raise with the location, keeping the category.
        std::string msg = e.what();
        msg = msg.substr(msg.find("error: ") + 7);
        fail(e.kind(), where(path, line_no) + msg);
      }
      throw;
    }
  }
}

std::string text_field(const json& r, const char* name) {
  auto it = r.find(name);
  if (it == r.end()) fail(ErrorKind::kParse, std::string("missing field '") + name + "'");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  fail(ErrorKind::kParse, std::string("field '") + name + "' must be a string");
}

int alpha_label(const json& r) {
  auto it = r.find("label");
  if (it == r.end()) fail(ErrorKind::kParse, "missing field 'label'");
  long long v = 0;
  if (it->is_number_integer()) {
    v = it->get<long long>();
  } else if (it->is_string()) {
    const auto s = it->get<std::string>();
    if (s == "1") v = 1;
    else if (s == "2") v = 2;
    else fail(ErrorKind::kLabel, "alpha-NLI label must be 1 or 2, got '" + s + "'");
  } else {
    fail(ErrorKind::kLabel, "alpha-NLI label must be 1 or 2");
  }
  if (v != 1 && v != 2) {
    fail(ErrorKind::kLabel, "alpha-NLI label must be 1 or 2, got " + std::to_string(v));
  }
  return static_cast<int>(v);
}

bool cip_label(const json& r) {
  auto it = r.find("label");
  if (it == r.end()) fail(ErrorKind::kParse, "missing field 'label'");
  if (it->is_boolean()) return it->get<bool>();
  if (it->is_string()) {
    std::string s = it->get<std::string>();
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s == "yes") return true;
    if (s == "no") return false;
    fail(ErrorKind::kLabel, "CIP label must be yes or no, got '" + it->get<std::string>() + "'");
  }
  fail(ErrorKind::kLabel, "CIP label must be yes or no");
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

json rule_json(const std::string& id, int option, const KnowledgeRule& rule) {
  json j = {{"id", id},
            {"option", option},
            {"head", rule.head},
            {"relation", std::string(relation_name(rule.relation))},
            {"tail", rule.tail}};
  if (rule.relevance) j["relevance"] = std::string(relevance_name(*rule.relevance));
  return j;
}

template <typename Fn>
void write_lines(const std::filesystem::path& path, Fn&& emit) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::kFile, "cannot write " + path.string());
  emit(out);
  if (!out) fail(ErrorKind::kFile, "failed writing " + path.string());
}

struct SidecarRule {
  std::string id;
  int option;
  KnowledgeRule rule;
};

std::vector<SidecarRule> parse_sidecar(const std::filesystem::path& path) {
  std::vector<SidecarRule> out;
  for_each_record(path, [&](const json& r, std::size_t) {
    SidecarRule s;
    s.id = text_field(r, "id");
    auto opt = r.find("option");
    if (opt == r.end()) fail(ErrorKind::kParse, "missing field 'option'");
    if (opt->is_number_integer()) {
      s.option = opt->get<int>();
    } else if (opt->is_string()) {
      try {
        s.option = std::stoi(opt->get<std::string>());
      } catch (const std::exception&) {
        fail(ErrorKind::kParse, "option must be an integer");
      }
    } else {
      fail(ErrorKind::kParse, "option must be an integer");
    }
    s.rule.head = text_field(r, "head");
    s.rule.relation = parse_relation(text_field(r, "relation"));
    s.rule.tail = text_field(r, "tail");
    if (auto rel = r.find("relevance"); rel != r.end() && !rel->is_null()) {
      s.rule.relevance = parse_relevance(rel->get<std::string>());
    }
    out.push_back(std::move(s));
  });
  return out;
}

}  // namespace

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void AlphaNliInstance::validate() const {
  if (blank(o1) || blank(o2) || blank(h1) || blank(h2)) {
    fail(ErrorKind::kData, "alpha-NLI instance " + id + " has an empty text field");
  }
  if (gold != 1 && gold != 2) {
    fail(ErrorKind::kLabel, "alpha-NLI instance " + id + " has gold " + std::to_string(gold));
  }
}

void CipInstance::validate() const {
  if (blank(s1) || blank(s2) || blank(s3) || blank(s2_cf)) {
    fail(ErrorKind::kData, "CIP instance " + id + " has an empty text field");
  }
  if (normalize_sentence(s2) == normalize_sentence(s2_cf)) {
    fail(ErrorKind::kData, "CIP instance " + id + " has s2' equal to s2");
  }
}

void StoryRewrite::validate() const {
  for (const auto& s : story) {
    if (blank(s)) fail(ErrorKind::kData, "rewrite " + id + " lacks a story sentence");
  }
  if (blank(s2_cf)) fail(ErrorKind::kData, "rewrite " + id + " lacks s2'");
  if (edited_ending.empty() || blank(edited_ending.front())) {
    fail(ErrorKind::kData, "rewrite " + id + " lacks an edited ending");
  }
}

std::string normalize_sentence(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  while (!out.empty() && (std::ispunct(static_cast<unsigned char>(out.back())) ||
                          out.back() == ' ')) {
    out.pop_back();
  }
  return out;
}

std::vector<AlphaNliInstance> parse_alpha_nli(const std::filesystem::path& path) {
  std::vector<AlphaNliInstance> out;
  for_each_record(path, [&](const json& r, std::size_t) {
    AlphaNliInstance x;
    x.id = text_field(r, "id");
    x.o1 = text_field(r, "obs1");
    x.o2 = text_field(r, "obs2");
    x.h1 = text_field(r, "hyp1");
    x.h2 = text_field(r, "hyp2");
    x.gold = alpha_label(r);
    x.validate();
    out.push_back(std::move(x));
  });
  return out;
}

std::vector<CipInstance> parse_cip(const std::filesystem::path& path) {
  std::vector<CipInstance> out;
  for_each_record(path, [&](const json& r, std::size_t) {
    CipInstance x;
    x.id = text_field(r, "id");
    x.s1 = text_field(r, "s1");
    x.s2 = text_field(r, "s2");
    x.s3 = text_field(r, "s3");
    x.s2_cf = text_field(r, "s2_cf");
    x.gold_yes = cip_label(r);
    x.validate();
    out.push_back(std::move(x));
  });
  return out;
}

std::vector<StoryRewrite> parse_rewrites(const std::filesystem::path& path) {
  std::vector<StoryRewrite> out;
  for_each_record(path, [&](const json& r, std::size_t) {
    StoryRewrite x;
    x.id = text_field(r, "id");
    for (int i = 0; i < 5; ++i) {
      x.story[i] = text_field(r, ("s" + std::to_string(i + 1)).c_str());
    }
    x.s2_cf = text_field(r, "s2_cf");
    x.edited_ending.push_back(text_field(r, "s3_cf"));
    for (const char* name : {"s4_cf", "s5_cf"}) {
      if (r.contains(name)) x.edited_ending.push_back(text_field(r, name));
    }
    x.validate();
    out.push_back(std::move(x));
  });
  return out;
}

void attach_knowledge(std::vector<AlphaNliInstance>& instances,
                      const std::filesystem::path& sidecar) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < instances.size(); ++i) index.emplace(instances[i].id, i);
  for (auto& s : parse_sidecar(sidecar)) {
    auto it = index.find(s.id);
    if (it == index.end()) {
      fail(ErrorKind::kData, "knowledge for unknown instance " + s.id);
    }
    if (s.option != 1 && s.option != 2) {
      fail(ErrorKind::kData, "alpha-NLI knowledge option must be 1 or 2 (instance " + s.id + ")");
    }
    instances[it->second].rules[s.option - 1].push_back(std::move(s.rule));
  }
}

void attach_knowledge(std::vector<CipInstance>& instances,
                      const std::filesystem::path& sidecar) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < instances.size(); ++i) index.emplace(instances[i].id, i);
  for (auto& s : parse_sidecar(sidecar)) {
    auto it = index.find(s.id);
    if (it == index.end()) {
      fail(ErrorKind::kData, "knowledge for unknown instance " + s.id);
    }
    if (s.option != 1) {
      fail(ErrorKind::kData, "CIP knowledge option must be 1 (instance " + s.id + ")");
    }
    instances[it->second].rules.push_back(std::move(s.rule));
  }
}

void write_alpha_nli(const std::filesystem::path& path,
                     const std::vector<AlphaNliInstance>& instances) {
  write_lines(path, [&](std::ostream& out) {
    for (const auto& x : instances) {
      out << json{{"id", x.id}, {"obs1", x.o1}, {"obs2", x.o2}, {"hyp1", x.h1},
                  {"hyp2", x.h2}, {"label", x.gold}}.dump()
          << '\n';
    }
  });
}

void write_cip(const std::filesystem::path& path,
               const std::vector<CipInstance>& instances) {
  write_lines(path, [&](std::ostream& out) {
    for (const auto& x : instances) {
      out << json{{"id", x.id}, {"s1", x.s1}, {"s2", x.s2}, {"s3", x.s3},
                  {"s2_cf", x.s2_cf}, {"label", x.gold_yes ? "yes" : "no"}}.dump()
          << '\n';
    }
  });
}

void write_knowledge(const std::filesystem::path& path,
                     const std::vector<AlphaNliInstance>& instances) {
  write_lines(path, [&](std::ostream& out) {
    for (const auto& x : instances) {
      for (int o = 0; o < 2; ++o) {
        for (const auto& rule : x.rules[o]) out << rule_json(x.id, o + 1, rule).dump() << '\n';
      }
    }
  });
}

void write_knowledge(const std::filesystem::path& path,
                     const std::vector<CipInstance>& instances) {
  write_lines(path, [&](std::ostream& out) {
    for (const auto& x : instances) {
      for (const auto& rule : x.rules) out << rule_json(x.id, 1, rule).dump() << '\n';
    }
  });
}

std::vector<CipInstance> build_cip_from_rewrites(
    const std::vector<StoryRewrite>& rewrites, std::uint64_t seed) {
  if (rewrites.empty()) fail(ErrorKind::kData, "no rewrites to build from");
  std::vector<CipInstance> candidates;
  std::vector<std::size_t> yes, no;
  for (const auto& r : rewrites) {
    r.validate();
    if (normalize_sentence(r.story[1]) == normalize_sentence(r.s2_cf)) continue;
    CipInstance x;
    x.id = r.id;
    x.s1 = r.story[0];
    x.s2 = r.story[1];
    x.s3 = r.story[2];
    x.s2_cf = r.s2_cf;
    x.gold_yes = normalize_sentence(r.story[2]) == normalize_sentence(r.edited_ending.front());
    (x.gold_yes ? yes : no).push_back(candidates.size());
    candidates.push_back(std::move(x));
  }
  const std::size_t keep = std::min(yes.size(), no.size());
  if (keep == 0) {
    fail(ErrorKind::kData, "balancing leaves no instances (" + std::to_string(yes.size()) +
                               " yes, " + std::to_string(no.size()) + " no)");
  }
  Rng rng(seed);
  auto& majority = yes.size() > no.size() ? yes : no;
  std::shuffle(majority.begin(), majority.end(), rng);
  majority.resize(keep);
  std::vector<std::size_t> kept(yes);
  kept.insert(kept.end(), no.begin(), no.end());
  std::sort(kept.begin(), kept.end());
  std::vector<CipInstance> out;
  out.reserve(kept.size());
  for (std::size_t i : kept) out.push_back(std::move(candidates[i]));
  return out;
}

void collect_texts(const std::vector<AlphaNliInstance>& instances,
                   std::vector<std::string>& out) {
  for (const auto& x : instances) {
    out.insert(out.end(), {x.o1, x.o2, x.h1, x.h2});
    for (const auto& option : x.rules) {
      for (const auto& r : option) out.push_back(verbalize_rule(r));
    }
  }
}

void collect_texts(const std::vector<CipInstance>& instances, std::vector<std::string>& out) {
  for (const auto& x : instances) {
    out.insert(out.end(), {x.s1, x.s2, x.s3, x.s2_cf});
    for (const auto& r : x.rules) out.push_back(verbalize_rule(r));
  }
}

}  // namespace mhka
