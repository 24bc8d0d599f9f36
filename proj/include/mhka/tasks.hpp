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

// Task records and their line-delimited JSON files.
//
//   alpha-NLI  {"id", "obs1", "obs2", "hyp1", "hyp2", "label"}   label 1 | 2
//   CIP        {"id", "s1", "s2", "s3", "s2_cf", "label"}        label yes | no
//   knowledge  {"id", "option", "head", "relation", "tail", "relevance"?}
//   rewrites   {"id", "s1".."s5", "s2_cf", "s3_cf", "s4_cf"?, "s5_cf"?}
//
// Knowledge lines are keyed by instance id and option (1 or 2 for alpha-NLI,
// 1 for CIP); rules keep their file order within an option.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mhka/knowledge.hpp"

namespace mhka {

struct AlphaNliInstance {
  std::string id;
  std::string o1, o2, h1, h2;
  int gold = 1;  // 1 or 2
  std::array<std::vector<KnowledgeRule>, 2> rules;

  const std::string& hypothesis(int index) const { return index == 1 ? h1 : h2; }
  void validate() const;
};

struct CipInstance {
  std::string id;
  std::string s1, s2, s3, s2_cf;
  bool gold_yes = false;
  std::vector<KnowledgeRule> rules;

  void validate() const;
};

struct StoryRewrite {
  std::string id;
  std::array<std::string, 5> story;         // s1..s5
  std::string s2_cf;                         // counterfactual s2'
  std::vector<std::string> edited_ending;    // s3'..s5', at least s3'
  void validate() const;
};

// Lowercase, collapse whitespace, strip terminal punctuation.
std::string normalize_sentence(std::string_view text);

std::vector<AlphaNliInstance> parse_alpha_nli(const std::filesystem::path& path);
std::vector<CipInstance> parse_cip(const std::filesystem::path& path);
std::vector<StoryRewrite> parse_rewrites(const std::filesystem::path& path);

// Attaches sidecar rules to matching instances; unknown ids are a data error.
void attach_knowledge(std::vector<AlphaNliInstance>& instances,
                      const std::filesystem::path& sidecar);
void attach_knowledge(std::vector<CipInstance>& instances,
                      const std::filesystem::path& sidecar);

void write_alpha_nli(const std::filesystem::path& path,
                     const std::vector<AlphaNliInstance>& instances);
void write_cip(const std::filesystem::path& path,
               const std::vector<CipInstance>& instances);
void write_knowledge(const std::filesystem::path& path,
                     const std::vector<AlphaNliInstance>& instances);
void write_knowledge(const std::filesystem::path& path,
                     const std::vector<CipInstance>& instances);

// Labels each rewrite yes iff normalized s3 equals normalized s3', then
// downsamples the majority class uniformly (seeded) to an exact balance.
// Retained instances keep their input order. Rewrites whose s2' does not
// differ from s2 are skipped.
std::vector<CipInstance> build_cip_from_rewrites(
    const std::vector<StoryRewrite>& rewrites, std::uint64_t seed);

// Appends every task text and verbalized rule, for vocabulary building.
void collect_texts(const std::vector<AlphaNliInstance>& instances,
                   std::vector<std::string>& out);
void collect_texts(const std::vector<CipInstance>& instances, std::vector<std::string>& out);

// Stable 64-bit FNV-1a, for seeding per-record randomness.
std::uint64_t fnv1a(std::string_view text);

}  // namespace mhka
