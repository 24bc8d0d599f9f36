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

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mhka {

// Reserved ids, always the first five entries of a vocabulary.
inline constexpr int kClsId = 0;
inline constexpr int kSepId = 1;
inline constexpr int kPadId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kNoKnowId = 4;
inline constexpr int kReservedCount = 5;

inline constexpr std::string_view kReservedTokens[kReservedCount] = {
    "[CLS]", "[SEP]", "[PAD]", "[UNK]", "[NOKNOW]"};

// Lowercases, splits on whitespace, and emits every ASCII punctuation
// character as a token of its own: "Dotty was grumpy." -> dotty was grumpy .
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  // Tokens seen at least `min_count` times, ordered by (count desc, token).
  static Vocabulary build(std::span<const std::string> corpus, int min_count);
  // `tokens` must start with the reserved tokens in order.
  static Vocabulary from_tokens(std::vector<std::string> tokens);
  // One token per line, line number = id.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  // [UNK] for unknown tokens.
  int id(std::string_view token) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(std::string_view text) const;
  // Space-joined tokens.
  std::string decode(std::span<const int> ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace mhka
