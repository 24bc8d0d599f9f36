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

#include "mhka/model.hpp"

#include <algorithm>

#include "mhka/checkpoint.hpp"
#include "mhka/error.hpp"

namespace mhka {

std::string_view variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::kMhka: return "mhka";
    case ModelVariant::kBlind: return "blind";
    case ModelVariant::kJoint: return "joint";
  }
  return "?";
}

ModelVariant parse_variant(std::string_view name) {
  if (name == "mhka") return ModelVariant::kMhka;
  if (name == "blind") return ModelVariant::kBlind;
  if (name == "joint") return ModelVariant::kJoint;
  fail(ErrorKind::kConfig, "unknown model variant " + std::string(name));
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) fail(ErrorKind::kConfig, std::string(name) + " must be at least 1");
  };
  positive(d_model, "d_model");
  positive(n_heads, "n_heads");
  positive(ctx_layers, "ctx_layers");
  positive(know_layers, "know_layers");
  positive(reason_layers, "reason_layers");
  positive(d_ff, "d_ff");
  positive(vocab_size, "vocab_size");
  positive(max_positions, "max_positions");
  positive(knowledge_max_positions, "knowledge_max_positions");
  if (d_model % n_heads != 0) {
    fail(ErrorKind::kConfig, "d_model " + std::to_string(d_model) +
                                 " is not divisible by n_heads " +
                                 std::to_string(n_heads));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    fail(ErrorKind::kConfig, "dropout must lie in [0, 1)");
  }
  if (!(init_std > 0.0)) fail(ErrorKind::kConfig, "init_std must be positive");
  if (!(layer_norm_eps > 0.0)) fail(ErrorKind::kConfig, "layer_norm_eps must be positive");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"variant", std::string(variant_name(variant))},
          {"d_model", d_model},
          {"n_heads", n_heads},
          {"ctx_layers", ctx_layers},
          {"know_layers", know_layers},
          {"reason_layers", reason_layers},
          {"d_ff", d_ff},
          {"vocab_size", vocab_size},
          {"max_positions", max_positions},
          {"knowledge_max_positions", knowledge_max_positions},
          {"dropout", dropout},
          {"init_std", init_std},
          {"layer_norm_eps", layer_norm_eps},
          {"share_knowledge_embedding", share_knowledge_embedding}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::kConfig, "model config must be an object");
  ModelConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "variant") c.variant = parse_variant(value.get<std::string>());
      else if (key == "d_model") c.d_model = value.get<std::size_t>();
      else if (key == "n_heads") c.n_heads = value.get<std::size_t>();
      else if (key == "ctx_layers") c.ctx_layers = value.get<std::size_t>();
      else if (key == "know_layers") c.know_layers = value.get<std::size_t>();
      else if (key == "reason_layers") c.reason_layers = value.get<std::size_t>();
      else if (key == "d_ff") c.d_ff = value.get<std::size_t>();
      else if (key == "vocab_size") c.vocab_size = value.get<std::size_t>();
      else if (key == "max_positions") c.max_positions = value.get<std::size_t>();
      else if (key == "knowledge_max_positions") c.knowledge_max_positions = value.get<std::size_t>();
      else if (key == "dropout") c.dropout = value.get<double>();
      else if (key == "init_std") c.init_std = value.get<double>();
      else if (key == "layer_norm_eps") c.layer_norm_eps = value.get<double>();
      else if (key == "share_knowledge_embedding") c.share_knowledge_embedding = value.get<bool>();
      else fail(ErrorKind::kConfig, "unknown model config field " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, std::string("model config: ") + e.what());
  }
  return c;
}

namespace {

void fill_joint(EncodedOption& opt, const ModelConfig& config) {
  if (config.variant == ModelVariant::kJoint) {
    opt.joint = encode_joint(opt.context, opt.knowledge, config.max_positions);
  }
}

}  // namespace

EncodedExample encode_example(const AlphaNliInstance& instance, const Vocabulary& vocab,
                              const ModelConfig& config) {
  instance.validate();
  EncodedExample ex;
  ex.id = instance.id;
  for (int i = 1; i <= 2; ++i) {
    EncodedOption opt;
    opt.context = encode_alpha_nli(instance, i, vocab, config.max_positions);
    opt.knowledge = encode_rules(instance.rules[i - 1], vocab,
                                 config.knowledge_max_positions);
    fill_joint(opt, config);
    ex.options.push_back(std::move(opt));
  }
  ex.gold = static_cast<std::size_t>(instance.gold - 1);
  return ex;
}

EncodedExample encode_example(const CipInstance& instance, const Vocabulary& vocab,
                              const ModelConfig& config) {
  instance.validate();
  EncodedExample ex;
  ex.id = instance.id;
  EncodedOption opt;
  opt.context = encode_cip(instance, vocab, config.max_positions);
  opt.knowledge = encode_rules(instance.rules, vocab, config.knowledge_max_positions);
  fill_joint(opt, config);
  ex.options.push_back(std::move(opt));
  ex.gold = instance.gold_yes ? 1 : 0;
  return ex;
}

Prediction classify(std::span<const double> logits) {
  if (logits.empty()) fail(ErrorKind::kDimension, "no logits to classify");
  if (logits.size() == 1) return {logits[0] > 0.0 ? std::size_t{1} : std::size_t{0}};
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return {best};
}

template <typename T>
MhkaModel<T>::MhkaModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(mix_seed(seed, 0x6d6f64656cULL));
  const std::size_t d = config_.d_model;
  ctx_tok_ = add_weight("context.tok_emb", {config_.vocab_size, d}, rng);
  ctx_pos_ = add_weight("context.pos_emb", {config_.max_positions, d}, rng);
  for (std::size_t i = 0; i < config_.ctx_layers; ++i) {
    ctx_blocks_.push_back(add_block("context.blocks." + std::to_string(i), rng));
  }
  if (config_.variant == ModelVariant::kMhka) {
    know_tok_ = config_.share_knowledge_embedding
                    ? ctx_tok_
                    : add_weight("knowledge.tok_emb", {config_.vocab_size, d}, rng);
    know_pos_ = add_weight("knowledge.pos_emb", {config_.knowledge_max_positions, d}, rng);
    for (std::size_t i = 0; i < config_.know_layers; ++i) {
      know_blocks_.push_back(add_block("knowledge.blocks." + std::to_string(i), rng));
    }
    reason_pos_ = add_weight("reasoning.pos_emb", {config_.max_positions, d}, rng);
    for (std::size_t i = 0; i < config_.reason_layers; ++i) {
      reason_layers_.push_back(add_block("reasoning.layers." + std::to_string(i), rng));
    }
  }
  head_w_ = add_weight("head.weight", {d, 1}, rng);
  head_b_ = add_const("head.bias", {1}, T(0));
}

template <typename T>
std::size_t MhkaModel<T>::add_weight(const std::string& name, Shape shape, Rng& rng) {
  return params_.add(name, normal_tensor<T>(std::move(shape),
                                            static_cast<T>(config_.init_std), rng));
}

template <typename T>
std::size_t MhkaModel<T>::add_const(const std::string& name, Shape shape, T value) {
  return params_.add(name, Tensor<T>(std::move(shape), value));
}

template <typename T>
typename MhkaModel<T>::BlockParams MhkaModel<T>::add_block(const std::string& prefix,
                                                           Rng& rng) {
  const std::size_t d = config_.d_model;
  BlockParams b{};
  const std::string a = prefix + ".attn.";
  b.attn.wq = add_weight(a + "wq", {d, d}, rng);
  b.attn.bq = add_const(a + "bq", {d}, T(0));
  b.attn.wk = add_weight(a + "wk", {d, d}, rng);
  b.attn.bk = add_const(a + "bk", {d}, T(0));
  b.attn.wv = add_weight(a + "wv", {d, d}, rng);
  b.attn.bv = add_const(a + "bv", {d}, T(0));
  b.attn.wo = add_weight(a + "wo", {d, d}, rng);
  b.attn.bo = add_const(a + "bo", {d}, T(0));
  b.ln1_g = add_const(prefix + ".ln1.gamma", {d}, T(1));
  b.ln1_b = add_const(prefix + ".ln1.beta", {d}, T(0));
  b.w1 = add_weight(prefix + ".ff.w1", {d, config_.d_ff}, rng);
  b.b1 = add_const(prefix + ".ff.b1", {config_.d_ff}, T(0));
  b.w2 = add_weight(prefix + ".ff.w2", {config_.d_ff, d}, rng);
  b.b2 = add_const(prefix + ".ff.b2", {d}, T(0));
  b.ln2_g = add_const(prefix + ".ln2.gamma", {d}, T(1));
  b.ln2_b = add_const(prefix + ".ln2.beta", {d}, T(0));
  return b;
}

template <typename T>
Var MhkaModel<T>::linear(Graph<T>& g, Var x, std::size_t w, std::size_t b) const {
  return g.add_row(g.matmul(x, g.param(params_, w)), g.param(params_, b));
}

template <typename T>
Var MhkaModel<T>::attention_sublayer(Graph<T>& g, const AttentionParams& p, Var query,
                                     Var memory, bool causal, Var* weights_node) const {
  Var q = linear(g, query, p.wq, p.bq);
  Var k = linear(g, memory, p.wk, p.bk);
  Var v = linear(g, memory, p.wv, p.bv);
  Var a = g.attention(q, k, v, config_.n_heads, causal);
  if (weights_node) *weights_node = a;
  return linear(g, a, p.wo, p.bo);
}

template <typename T>
Var MhkaModel<T>::block(Graph<T>& g, const BlockParams& p, Var x, Var memory, bool causal,
                        Var* weights_node) const {
  const T rate = static_cast<T>(config_.dropout);
  const T eps = static_cast<T>(config_.layer_norm_eps);
  Var a = g.dropout(attention_sublayer(g, p.attn, x, memory, causal, weights_node), rate);
  x = g.layer_norm(g.add(x, a), g.param(params_, p.ln1_g), g.param(params_, p.ln1_b), eps);
  Var f = linear(g, g.gelu(linear(g, x, p.w1, p.b1)), p.w2, p.b2);
  f = g.dropout(f, rate);
  return g.layer_norm(g.add(x, f), g.param(params_, p.ln2_g), g.param(params_, p.ln2_b), eps);
}

template <typename T>
Var MhkaModel<T>::embed(Graph<T>& g, std::size_t tok, std::size_t pos,
                        std::span<const int> ids, std::size_t limit,
                        const char* what) const {
  if (ids.empty()) fail(ErrorKind::kEncoding, std::string(what) + " sequence is empty");
  if (ids.size() > limit) {
    fail(ErrorKind::kEncoding, std::string(what) + " sequence of " +
                                   std::to_string(ids.size()) + " tokens exceeds " +
                                   std::to_string(limit) + " positions");
  }
  Var e = g.embedding(g.param(params_, tok), ids);
  Var p = g.rows(g.param(params_, pos), 0, ids.size());
  return g.dropout(g.add(e, p), static_cast<T>(config_.dropout));
}

template <typename T>
Var MhkaModel<T>::encode_context(Graph<T>& g, std::span<const int> ids) const {
  Var x = embed(g, ctx_tok_, ctx_pos_, ids, config_.max_positions, "context");
  for (const auto& b : ctx_blocks_) x = block(g, b, x, x, false, nullptr);
  return x;
}

template <typename T>
Var MhkaModel<T>::encode_knowledge_stack(Graph<T>& g, std::span<const int> ids) const {
  if (know_blocks_.empty()) fail(ErrorKind::kContract, "model has no knowledge encoder");
  Var x = embed(g, know_tok_, know_pos_, ids, config_.knowledge_max_positions, "knowledge");
  for (const auto& b : know_blocks_) x = block(g, b, x, x, true, nullptr);
  return x;
}

template <typename T>
typename MhkaModel<T>::ReasoningOutput MhkaModel<T>::reasoning_cell(Graph<T>& g, Var hx,
                                                                    Var hk) const {
  if (reason_layers_.empty()) fail(ErrorKind::kContract, "model has no reasoning cell");
  const auto& X = g.value(hx);
  if (X.cols() != g.value(hk).cols()) {
    fail(ErrorKind::kDimension, "context " + shape_to_string(X.shape()) +
                                    " and knowledge " +
                                    shape_to_string(g.value(hk).shape()) +
                                    " differ in width");
  }
  ReasoningOutput out;
  Var x = g.add(hx, g.rows(g.param(params_, reason_pos_), 0, X.rows()));
  for (const auto& layer : reason_layers_) {
    Var w;
    x = block(g, layer, x, hk, false, &w);
    out.attention.push_back(w);
  }
  out.refined = x;
  return out;
}

template <typename T>
typename MhkaModel<T>::ReasoningOutput MhkaModel<T>::reasoning_attention(Graph<T>& g, Var hx,
                                                                         Var hk) const {
  if (reason_layers_.empty()) fail(ErrorKind::kContract, "model has no reasoning cell");
  const auto& X = g.value(hx);
  if (X.cols() != g.value(hk).cols()) {
    fail(ErrorKind::kDimension, "context and knowledge differ in width");
  }
  Var q = g.add(hx, g.rows(g.param(params_, reason_pos_), 0, X.rows()));
  ReasoningOutput out;
  Var w;
  out.refined = attention_sublayer(g, reason_layers_.front().attn, q, hk, false, &w);
  out.attention.push_back(w);
  return out;
}

template <typename T>
Var MhkaModel<T>::classify_head(Graph<T>& g, Var states) const {
  return linear(g, g.rows(states, 0, 1), head_w_, head_b_);
}

template <typename T>
Var MhkaModel<T>::option_logit(Graph<T>& g, const EncodedOption& option) const {
  switch (config_.variant) {
    case ModelVariant::kBlind:
      return classify_head(g, encode_context(g, option.context.ids));
    case ModelVariant::kJoint:
      if (option.joint.ids.empty()) {
        fail(ErrorKind::kContract, "joint model needs a joint-encoded option");
      }
      return classify_head(g, encode_context(g, option.joint.ids));
    case ModelVariant::kMhka:
      break;
  }
  Var hx = encode_context(g, option.context.ids);
  Var hk = encode_knowledge_stack(g, option.knowledge.tokens.ids);
  return classify_head(g, reasoning_cell(g, hx, hk).refined);
}

template <typename T>
Var MhkaModel<T>::logits(Graph<T>& g, const EncodedExample& example) const {
  if (example.options.empty()) fail(ErrorKind::kContract, "example has no options");
  std::vector<Var> parts;
  parts.reserve(example.options.size());
  for (const auto& opt : example.options) parts.push_back(option_logit(g, opt));
  return g.concat(parts);
}

template <typename T>
void MhkaModel<T>::reinit_head(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x68656164ULL));
  params_[head_w_].value = normal_tensor<T>({config_.d_model, 1},
                                            static_cast<T>(config_.init_std), rng);
  params_[head_b_].value.fill(T(0));
}

template <typename T>
bool MhkaModel<T>::is_head_parameter(const std::string& name) const {
  return name.rfind("head.", 0) == 0;
}

template class MhkaModel<float>;
template class MhkaModel<double>;

template <typename T>
std::vector<double> score(const MhkaModel<T>& model, const EncodedExample& example) {
  Graph<T> g(false);
  const auto& v = g.value(model.logits(g, example));
  return {v.values().begin(), v.values().end()};
}

template <typename T>
AlphaNliScores forward_alpha_nli(const MhkaModel<T>& model, const Vocabulary& vocab,
                                 const AlphaNliInstance& instance) {
  const auto s = score(model, encode_example(instance, vocab, model.config()));
  return {s[0], s[1], static_cast<int>(classify(s).index) + 1};
}

template <typename T>
CipScore forward_cip(const MhkaModel<T>& model, const Vocabulary& vocab,
                     const CipInstance& instance) {
  const auto s = score(model, encode_example(instance, vocab, model.config()));
  return {s[0], classify(s).index == 1};
}

template <typename T>
std::vector<double> forward_joint_baseline(const MhkaModel<T>& model,
                                           const Vocabulary& vocab,
                                           const AlphaNliInstance& instance) {
  if (model.config().variant != ModelVariant::kJoint) {
    fail(ErrorKind::kContract, "forward_joint_baseline needs a joint model");
  }
  return score(model, encode_example(instance, vocab, model.config()));
}

template <typename T>
void save_model(const std::filesystem::path& path, const MhkaModel<T>& model,
                const Vocabulary& vocab, std::uint64_t seed, const nlohmann::json& extra) {
  nlohmann::json header = extra;
  header["seed"] = seed;
  header["model"] = model.config().to_json();
  header["vocabulary"] = vocab.tokens();
  save_checkpoint(path, model.parameters(), header);
}

template <typename T>
LoadedModel<T> load_model(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  const auto& h = ckpt.header;
  if (!h.contains("model") || !h.contains("vocabulary") || !h.contains("seed")) {
    fail(ErrorKind::kCheckpoint, path.string() + " is not a model checkpoint");
  }
  const auto seed = h["seed"].get<std::uint64_t>();
  MhkaModel<T> model(ModelConfig::from_json(h["model"]), seed);
  restore_parameters(ckpt, model.parameters());
  return {std::move(model),
          Vocabulary::from_tokens(h["vocabulary"].get<std::vector<std::string>>()), seed,
          h};
}

#define MHKA_INSTANTIATE(T)                                                            \
  template std::vector<double> score(const MhkaModel<T>&, const EncodedExample&);     \
  template AlphaNliScores forward_alpha_nli(const MhkaModel<T>&, const Vocabulary&,   \
                                            const AlphaNliInstance&);                  \
  template CipScore forward_cip(const MhkaModel<T>&, const Vocabulary&,               \
                                const CipInstance&);                                   \
  template std::vector<double> forward_joint_baseline(                                 \
      const MhkaModel<T>&, const Vocabulary&, const AlphaNliInstance&);                \
  template void save_model(const std::filesystem::path&, const MhkaModel<T>&,          \
                           const Vocabulary&, std::uint64_t, const nlohmann::json&);   \
  template LoadedModel<T> load_model(const std::filesystem::path&);

MHKA_INSTANTIATE(float)
MHKA_INSTANTIATE(double)
#undef MHKA_INSTANTIATE

}  // namespace mhka
