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

// Multi-head knowledge attention classifier.
//
// Three stacks share one ParameterStore:
//   context    token + position embeddings, bidirectional transformer blocks
//   knowledge  its own token embedding (W_ke) + positions (W_kp), causal
//              (masked) transformer blocks
//   reasoning  query = context states + W_xp, then per layer: cross-attention
//              over the knowledge states, residual + layer norm, feed-forward,
//              residual + layer norm
// A linear head maps the [CLS] row of the last stack to one logit per option.
//
// Variants reuse the same pieces: kBlind is context encoder + head,
// kJoint runs the context encoder over "[CLS] knowledge [SEP] input".

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mhka/autograd.hpp"
#include "mhka/encoding.hpp"
#include "mhka/parameters.hpp"

namespace mhka {

enum class ModelVariant { kMhka, kBlind, kJoint };

std::string_view variant_name(ModelVariant v);
ModelVariant parse_variant(std::string_view name);

struct ModelConfig {
  ModelVariant variant = ModelVariant::kMhka;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t ctx_layers = 2;
  std::size_t know_layers = 2;
  std::size_t reason_layers = 2;
  std::size_t d_ff = 256;
  std::size_t vocab_size = 0;
  std::size_t max_positions = kDefaultMaxPositions;
  std::size_t knowledge_max_positions = kDefaultKnowledgeMaxPositions;
  double dropout = 0.1;
  double init_std = 0.02;
  double layer_norm_eps = 1e-5;
  bool share_knowledge_embedding = false;

  void validate() const;
  nlohmann::json to_json() const;
  // Missing fields keep their defaults; unknown fields are a config error.
  static ModelConfig from_json(const nlohmann::json& j);
};

// One scored option: the encoded task input plus its knowledge.
struct EncodedOption {
  TokenSequence context;
  KnowledgeSequence knowledge;
  TokenSequence joint;  // filled only for kJoint models
};

// n options and the gold index into the logits (n == 1: 1 = yes, 0 = no).
struct EncodedExample {
  std::string id;
  std::vector<EncodedOption> options;
  std::size_t gold = 0;
};

EncodedExample encode_example(const AlphaNliInstance& instance,
                              const Vocabulary& vocab, const ModelConfig& config);
EncodedExample encode_example(const CipInstance& instance, const Vocabulary& vocab,
                              const ModelConfig& config);

template <typename Instance>
std::vector<EncodedExample> encode_dataset(const std::vector<Instance>& data,
                                           const Vocabulary& vocab,
                                           const ModelConfig& config) {
  std::vector<EncodedExample> out;
  out.reserve(data.size());
  for (const auto& x : data) out.push_back(encode_example(x, vocab, config));
  return out;
}

struct Prediction {
  // Option index for n >= 2 (0-based), or 1 = yes / 0 = no for n == 1.
  std::size_t index = 0;
};

// Argmax with ties toward the lower index; a single logit is yes iff > 0.
Prediction classify(std::span<const double> logits);

template <typename T>
class MhkaModel {
 public:
  MhkaModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterStore<T>& parameters() { return params_; }
  const ParameterStore<T>& parameters() const { return params_; }

  // h_x: [len x d_model].
  Var encode_context(Graph<T>& g, std::span<const int> ids) const;
  // h_k^L: [w x d_model], causal self-attention in every block.
  Var encode_knowledge_stack(Graph<T>& g, std::span<const int> ids) const;

  struct ReasoningOutput {
    Var refined;
    // One attention node per layer; Graph::attention_weights gives
    // [n_heads x len x w].
    std::vector<Var> attention;
  };
  ReasoningOutput reasoning_cell(Graph<T>& g, Var hx, Var hk) const;

  // Single-layer cross-attention from h_x (+ W_xp) onto h_k using the first
  // reasoning layer's projections. Returns the output-projected result.
  ReasoningOutput reasoning_attention(Graph<T>& g, Var hx, Var hk) const;

  // [1 x 1] logit from the [CLS] row of `states`.
  Var classify_head(Graph<T>& g, Var states) const;

  // [1 x 1] logit for one option, following the model variant.
  Var option_logit(Graph<T>& g, const EncodedOption& option) const;

  // [n] logits.
  Var logits(Graph<T>& g, const EncodedExample& example) const;

  // Fresh N(0, init_std) weights and zero bias for the classifier head.
  void reinit_head(std::uint64_t seed);
  bool is_head_parameter(const std::string& name) const;

 private:
  struct AttentionParams {
    std::size_t wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct BlockParams {
    AttentionParams attn;
    std::size_t ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b;
  };

  BlockParams add_block(const std::string& prefix, Rng& rng);
  std::size_t add_weight(const std::string& name, Shape shape, Rng& rng);
  std::size_t add_const(const std::string& name, Shape shape, T value);

  Var linear(Graph<T>& g, Var x, std::size_t w, std::size_t b) const;
  Var attention_sublayer(Graph<T>& g, const AttentionParams& p, Var query,
                         Var memory, bool causal, Var* weights_node) const;
  Var block(Graph<T>& g, const BlockParams& p, Var x, Var memory, bool causal,
            Var* weights_node) const;
  Var embed(Graph<T>& g, std::size_t tok, std::size_t pos,
            std::span<const int> ids, std::size_t limit, const char* what) const;

  ModelConfig config_;
  ParameterStore<T> params_;
  std::size_t ctx_tok_ = 0, ctx_pos_ = 0;
  std::vector<BlockParams> ctx_blocks_;
  std::size_t know_tok_ = 0, know_pos_ = 0;
  std::vector<BlockParams> know_blocks_;
  std::size_t reason_pos_ = 0;
  std::vector<BlockParams> reason_layers_;
  std::size_t head_w_ = 0, head_b_ = 0;
};

extern template class MhkaModel<float>;
extern template class MhkaModel<double>;

// Scores one example without building gradients.
template <typename T>
std::vector<double> score(const MhkaModel<T>& model, const EncodedExample& example);

struct AlphaNliScores {
  double s1 = 0, s2 = 0;
  int prediction = 1;  // 1 or 2
};
struct CipScore {
  double logit = 0;
  bool yes = false;
};

template <typename T>
AlphaNliScores forward_alpha_nli(const MhkaModel<T>& model, const Vocabulary& vocab,
                                 const AlphaNliInstance& instance);
template <typename T>
CipScore forward_cip(const MhkaModel<T>& model, const Vocabulary& vocab,
                     const CipInstance& instance);
// Requires a kJoint model. Returns the per-option logits.
template <typename T>
std::vector<double> forward_joint_baseline(const MhkaModel<T>& model,
                                           const Vocabulary& vocab,
                                           const AlphaNliInstance& instance);

// Model checkpoints carry the config, seed and vocabulary in the header.
template <typename T>
void save_model(const std::filesystem::path& path, const MhkaModel<T>& model,
                const Vocabulary& vocab, std::uint64_t seed,
                const nlohmann::json& extra = nlohmann::json::object());

template <typename T>
struct LoadedModel {
  MhkaModel<T> model;
  Vocabulary vocab;
  std::uint64_t seed;
  nlohmann::json header;
};

template <typename T>
LoadedModel<T> load_model(const std::filesystem::path& path);

}  // namespace mhka
