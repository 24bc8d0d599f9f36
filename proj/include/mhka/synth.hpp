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

// Synthetic task suites with one planted decisive rule per option.
//
// Every story ends with "<name> felt <w> afterwards" for a positive feeling
// w. Labels come from a fair coin; the texts carry no information about
// them. The decisive rule is an xReact rule about the event in question with
// a positive tail where the story holds together and a negative one where it
// does not:
//
//   alpha-NLI  option i:  <h_i> xReact <positive iff i is gold>
//   CIP                   <s2'> xReact <positive iff yes>
//
// The remaining rules are distractors over the other eight relations with
// neutral tails. Rule order is shuffled; the decisive position is reported.
// Every feeling's antonym has the opposite polarity.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mhka/knowledge.hpp"
#include "mhka/tasks.hpp"

namespace mhka {

struct SynthConfig {
  std::size_t n_instances = 1000;
  // Cap on distinct words drawn from each word pool (names, events, tails).
  std::size_t vocab_size = 20;
  std::size_t rules_per_instance = 16;
  double fraction_decisive = 1.0;
  std::uint64_t seed = 0;
  std::string id_prefix = "syn";

  void validate() const;
};

struct SynthAlphaNli {
  std::vector<AlphaNliInstance> instances;
  // Decisive rule position per option, -1 where none was planted.
  std::vector<std::array<int, 2>> decisive;
};

struct SynthCip {
  std::vector<CipInstance> instances;
  std::vector<int> decisive;
};

SynthAlphaNli synth_alpha_nli(const SynthConfig& config);
SynthCip synth_cip(const SynthConfig& config);

// The outcome-word lexicon the generator draws from, both directions.
AntonymMap synth_antonyms();

// {"id", "option", "rule_index"} per line; rule_index -1 when absent.
void write_decisive(const std::filesystem::path& path, const SynthAlphaNli& suite);
void write_decisive(const std::filesystem::path& path, const SynthCip& suite);

struct DecisiveRecord {
  std::string id;
  int option = 1;
  int rule_index = -1;
};
std::vector<DecisiveRecord> read_decisive(const std::filesystem::path& path);

}  // namespace mhka
