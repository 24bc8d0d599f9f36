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

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mhka/error.hpp"
#include "mhka/tasks.hpp"

namespace mhka {
namespace {

namespace fs = std::filesystem;

fs::path write_temp(const std::string& name, const std::string& body) {
  const auto dir = fs::temp_directory_path() / "mhka_unit_tasks";
  fs::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << body;
  return path;
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

TEST(Knowledge, VerbalizesDottyRule) {
  const KnowledgeRule r{"Dotty ate something bad", Relation::kXEffect, "PersonX feels sick",
                        std::nullopt};
  EXPECT_EQ(verbalize_rule(r), "dotty ate something bad effect on dotty dotty feels sick");
  const KnowledgeRule react{"Dotty ate something bad", Relation::kXReact, "sick", std::nullopt};
  EXPECT_EQ(verbalize_rule(react), "dotty ate something bad dotty feels sick");
}

TEST(Knowledge, VerbalizationKeepsPersonXWithoutSubject) {
  const KnowledgeRule r{"PersonX", Relation::kXWant, "to rest", std::nullopt};
  EXPECT_EQ(verbalize_rule(r), "personx personx wants to rest");
}

TEST(Knowledge, RelationNamesRoundTrip) {
  for (Relation r : kAllRelations) EXPECT_EQ(parse_relation(relation_name(r)), r);
  EXPECT_EQ(parse_relation("XREACT"), Relation::kXReact);
  EXPECT_EQ(kind_of([] { parse_relation("isA"); }), ErrorKind::kRelation);
  EXPECT_EQ(parse_relevance("partial"), Relevance::kPartial);
  EXPECT_EQ(kind_of([] { parse_relevance("maybe"); }), ErrorKind::kParse);
}

TEST(Knowledge, ExtractsEvents) {
  const auto single = extract_events("Dotty ate something bad.");
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].subject, "dotty");
  EXPECT_EQ(single[0].predicate, "ate");
  EXPECT_EQ(single[0].arguments, "something bad");

  const auto two = extract_events("The old man went home and ate dinner.");
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].subject, "the old man");
  EXPECT_EQ(two[1].subject, "the old man");
  EXPECT_EQ(two[1].predicate, "ate");
  EXPECT_EQ(two[1].arguments, "dinner");

  EXPECT_TRUE(extract_events("Blue sky.").empty());
}

TEST(Knowledge, AntonymsAreReadInBothDirections) {
  const auto path = write_temp("antonyms.tsv", "# lexicon\nhappy\tsad\nnice\tmean\n");
  const auto map = load_antonyms(path);
  EXPECT_EQ(map.at("happy"), "sad");
  EXPECT_EQ(map.at("sad"), "happy");
  EXPECT_EQ(map.at("mean"), "nice");
  EXPECT_EQ(kind_of([] { load_antonyms(write_temp("bad.tsv", "lonely\n")); }), ErrorKind::kParse);
  EXPECT_EQ(kind_of([] { load_antonyms("/nonexistent/antonyms.tsv"); }), ErrorKind::kFile);
}

TEST(Normalize, LowercasesCollapsesAndStripsTerminalPunctuation) {
  EXPECT_EQ(normalize_sentence("  He  went HOME. "), "he went home");
  EXPECT_EQ(normalize_sentence("Really?!"), "really");
  EXPECT_EQ(normalize_sentence("a.b"), "a.b");
}

TEST(Parse, AlphaNliRecordsAndErrors) {
  const auto ok = write_temp(
      "ok.jsonl",
      R"({"id": "a", "obs1": "x", "obs2": "y", "hyp1": "p", "hyp2": "q", "label": 1})"
      "\n\n"
      R"({"id": "b", "obs1": "x", "obs2": "y", "hyp1": "p", "hyp2": "q", "label": "2"})"
      "\n");
  const auto xs = parse_alpha_nli(ok);
  ASSERT_EQ(xs.size(), 2u);
  EXPECT_EQ(xs[0].gold, 1);
  EXPECT_EQ(xs[1].gold, 2);

  EXPECT_EQ(kind_of([] {
              parse_alpha_nli(write_temp(
                  "gold3.jsonl",
                  R"({"id": "a", "obs1": "x", "obs2": "y", "hyp1": "p", "hyp2": "q", "label": 3})"));
            }),
            ErrorKind::kLabel);
  EXPECT_EQ(kind_of([] {
              parse_alpha_nli(
                  write_temp("missing.jsonl", R"({"id": "a", "obs1": "x", "label": 1})"));
            }),
            ErrorKind::kParse);
  EXPECT_EQ(kind_of([] { parse_alpha_nli(write_temp("broken.jsonl", "{not json")); }),
            ErrorKind::kParse);
  EXPECT_EQ(kind_of([] { parse_alpha_nli("/nonexistent/x.jsonl"); }), ErrorKind::kFile);
}

TEST(Parse, CipLabelsAndErrors) {
  const auto xs = parse_cip(write_temp(
      "cip.jsonl", R"({"id": "c", "s1": "a", "s2": "b", "s3": "c", "s2_cf": "d", "label": "no"})"));
  ASSERT_EQ(xs.size(), 1u);
  EXPECT_FALSE(xs[0].gold_yes);
  EXPECT_EQ(kind_of([] {
              parse_cip(write_temp(
                  "cipbad.jsonl",
                  R"({"id": "c", "s1": "a", "s2": "b", "s3": "c", "s2_cf": "d", "label": "maybe"})"));
            }),
            ErrorKind::kLabel);
}

TEST(Parse, KnowledgeSidecarAttachesByIdAndOption) {
  auto xs = parse_alpha_nli(write_temp(
      "k.jsonl",
      R"({"id": "a", "obs1": "x", "obs2": "y", "hyp1": "p", "hyp2": "q", "label": 1})"));
  attach_knowledge(
      xs, write_temp("k.knowledge.jsonl",
                     R"({"id": "a", "option": 2, "head": "h", "relation": "xNeed", "tail": "t", "relevance": "relevant"})"
                     "\n"
                     R"({"id": "a", "option": 1, "head": "h", "relation": "oReact", "tail": "u"})"
                     "\n"));
  ASSERT_EQ(xs[0].rules[0].size(), 1u);
  ASSERT_EQ(xs[0].rules[1].size(), 1u);
  EXPECT_EQ(xs[0].rules[1][0].relation, Relation::kXNeed);
  EXPECT_EQ(xs[0].rules[1][0].relevance, Relevance::kRelevant);
  EXPECT_FALSE(xs[0].rules[0][0].relevance.has_value());

  EXPECT_EQ(kind_of([&] {
              attach_knowledge(xs, write_temp("k2.jsonl",
                                              R"({"id": "zz", "option": 1, "head": "h", "relation": "xNeed", "tail": "t"})"));
            }),
            ErrorKind::kData);
  EXPECT_EQ(kind_of([&] {
              attach_knowledge(xs, write_temp("k3.jsonl",
                                              R"({"id": "a", "option": 1, "head": "h", "relation": "isA", "tail": "t"})"));
            }),
            ErrorKind::kRelation);
}

TEST(Parse, WriteThenReadRoundTrips) {
  AlphaNliInstance x;
  x.id = "r";
  x.o1 = "one";
  x.o2 = "two";
  x.h1 = "three";
  x.h2 = "four";
  x.gold = 2;
  x.rules[0].push_back({"h", Relation::kXAttr, "t", Relevance::kIrrelevant});
  const auto dir = fs::temp_directory_path() / "mhka_unit_tasks";
  write_alpha_nli(dir / "rt.jsonl", {x});
  write_knowledge(dir / "rt.knowledge.jsonl", {x});
  auto back = parse_alpha_nli(dir / "rt.jsonl");
  attach_knowledge(back, dir / "rt.knowledge.jsonl");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].h2, "four");
  EXPECT_EQ(back[0].gold, 2);
  ASSERT_EQ(back[0].rules[0].size(), 1u);
  EXPECT_EQ(back[0].rules[0][0].relevance, Relevance::kIrrelevant);
}

std::vector<StoryRewrite> rewrites(int matches, int mismatches) {
  std::vector<StoryRewrite> out;
  for (int i = 0; i < matches + mismatches; ++i) {
    StoryRewrite r;
    r.id = "r" + std::to_string(i);
    r.story = {"S one.", "S two.", "S three.", "S four.", "S five."};
    r.s2_cf = "Counter two.";
    r.edited_ending = {i < matches ? "s three" : "Changed three.", "S four.", "S five."};
    out.push_back(std::move(r));
  }
  return out;
}

TEST(BuildCip, BalancesToMinorityCount) {
  for (auto [yes, no] : {std::pair{10, 4}, std::pair{12, 8}, std::pair{3, 9}}) {
    const auto cip = build_cip_from_rewrites(rewrites(yes, no), 7);
    const auto n_yes = std::count_if(cip.begin(), cip.end(), [](auto& c) { return c.gold_yes; });
    const long want = std::min(yes, no);
    EXPECT_EQ(n_yes, want);
    EXPECT_EQ(static_cast<long>(cip.size()) - n_yes, want);
    for (std::size_t i = 1; i < cip.size(); ++i) {
      EXPECT_LT(std::stoi(cip[i - 1].id.substr(1)), std::stoi(cip[i].id.substr(1)));
    }
  }
}

TEST(BuildCip, SeedSelectsMajoritySubsetDeterministically) {
  const auto a = build_cip_from_rewrites(rewrites(12, 8), 1);
  const auto b = build_cip_from_rewrites(rewrites(12, 8), 1);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].id, b[i].id);
}

TEST(BuildCip, SkipsUnchangedPremiseAndRejectsDegenerateInput) {
  auto rs = rewrites(2, 2);
  rs[0].s2_cf = "s two";
  const auto cip = build_cip_from_rewrites(rs, 1);
  EXPECT_EQ(cip.size(), 2u);
  EXPECT_EQ(kind_of([] { build_cip_from_rewrites(rewrites(5, 0), 1); }), ErrorKind::kData);
  EXPECT_EQ(kind_of([] { build_cip_from_rewrites({}, 1); }), ErrorKind::kData);
}

TEST(Parse, RewritesRequireEditedEnding) {
  const auto ok = parse_rewrites(write_temp(
      "rw.jsonl",
      R"({"id": "r", "s1": "a", "s2": "b", "s3": "c", "s4": "d", "s5": "e", "s2_cf": "f", "s3_cf": "c", "s4_cf": "d"})"));
  ASSERT_EQ(ok.size(), 1u);
  EXPECT_EQ(ok[0].edited_ending.size(), 2u);
  EXPECT_NE(kind_of([] {
              parse_rewrites(write_temp(
                  "rw2.jsonl",
                  R"({"id": "r", "s1": "a", "s2": "b", "s3": "c", "s4": "d", "s5": "e", "s2_cf": "f"})"));
            }),
            ErrorKind::kUsage);
}

TEST(Validate, InstancesRejectBadFields) {
  AlphaNliInstance x{"a", "o1", "o2", "h1", "h2", 3, {}};
  EXPECT_EQ(kind_of([&] { x.validate(); }), ErrorKind::kLabel);
  x.gold = 1;
  x.h2 = "  ";
  EXPECT_EQ(kind_of([&] { x.validate(); }), ErrorKind::kData);
  CipInstance c{"c", "a", "same", "c", "Same.", true, {}};
  EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::kData);
}

TEST(Fnv, MatchesKnownVector) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

}  // namespace
}  // namespace mhka
