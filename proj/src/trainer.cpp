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

#include "mhka/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "mhka/checkpoint.hpp"
#include "mhka/error.hpp"
#include "mhka/optimizer.hpp"
#include "mhka/parallel.hpp"

namespace mhka {

void TrainConfig::validate() const {
  if (!(lr > 0)) fail(ErrorKind::kConfig, "lr must be positive");
  if (batch_size < 1) fail(ErrorKind::kConfig, "batch_size must be at least 1");
  if (epochs < 1) fail(ErrorKind::kConfig, "epochs must be at least 1");
  if (!(train_fraction > 0 && train_fraction <= 1)) {
    fail(ErrorKind::kConfig, "train_fraction must lie in (0, 1]");
  }
  if (jobs < 0) fail(ErrorKind::kConfig, "jobs must not be negative");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lr", lr},         {"batch_size", batch_size},
          {"epochs", epochs}, {"seed", seed},
          {"train_fraction", train_fraction}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::kConfig, "train config must be an object");
  TrainConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "lr") c.lr = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "train_fraction") c.train_fraction = value.get<double>();
      else if (key == "jobs") c.jobs = value.get<int>();
      else fail(ErrorKind::kConfig, "unknown train config field " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, std::string("train config: ") + e.what());
  }
  return c;
}

Grid Grid::pretrained() { return {{1e-5, 2e-5, 5e-6}, {4, 8}, {3, 5, 10}}; }
Grid Grid::desk() { return {{1e-4, 3e-4, 1e-3}, {4, 8}, {3, 5, 10}}; }

Grid Grid::from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j == "pretrained") return pretrained();
    if (j == "desk") return desk();
    fail(ErrorKind::kConfig, "unknown grid preset " + j.get<std::string>());
  }
  Grid g = desk();
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "lr") g.lr = value.get<std::vector<double>>();
      else if (key == "batch_size") g.batch_size = value.get<std::vector<std::size_t>>();
      else if (key == "epochs") g.epochs = value.get<std::vector<std::size_t>>();
      else fail(ErrorKind::kConfig, "unknown grid field " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, std::string("grid: ") + e.what());
  }
  if (g.size() == 0) fail(ErrorKind::kConfig, "grid is empty");
  return g;
}

nlohmann::json Grid::to_json() const {
  return {{"lr", lr}, {"batch_size", batch_size}, {"epochs", epochs}};
}

std::vector<TrainConfig> Grid::expand(const TrainConfig& base) const {
  std::vector<TrainConfig> out;
  for (double l : lr) {
    for (std::size_t b : batch_size) {
      for (std::size_t e : epochs) {
        TrainConfig c = base;
        c.lr = l;
        c.batch_size = b;
        c.epochs = e;
        out.push_back(c);
      }
    }
  }
  return out;
}

nlohmann::json Metrics::to_json() const {
  nlohmann::json j = {{"epoch_loss", epoch_loss},
                      {"dev_accuracy", dev_accuracy},
                      {"best_epoch", best_epoch},
                      {"best_dev", best_dev}};
  if (test_accuracy) j["test_accuracy"] = *test_accuracy;
  return j;
}

template <typename T>
std::vector<std::size_t> predict(const MhkaModel<T>& model,
                                 const std::vector<EncodedExample>& data, int jobs) {
  std::vector<std::size_t> out(data.size());
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    out[i] = classify(score(model, data[i])).index;
  });
  return out;
}

template <typename T>
double evaluate(const MhkaModel<T>& model, const std::vector<EncodedExample>& data,
                int jobs) {
  if (data.empty()) fail(ErrorKind::kData, "cannot evaluate on an empty set");
  const auto pred = predict(model, data, jobs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += pred[i] == data[i].gold;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

template <typename T>
Metrics train(MhkaModel<T>& model, const std::vector<EncodedExample>& train_set,
              const std::vector<EncodedExample>& dev_set, const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) fail(ErrorKind::kData, "training set is empty");
  auto& params = model.parameters();
  AdamState<T> adam(config.lr);
  Metrics metrics;
  std::vector<Tensor<T>> best_values;
  const std::size_t n = train_set.size();
  std::vector<std::vector<Tensor<T>>> buffers;
  std::vector<double> losses;
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(mix_seed(config.seed, 0x7368756666ULL, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0;

    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n - start);
      buffers.resize(std::max(buffers.size(), count));
      losses.assign(count, 0.0);
      parallel_for(count, config.jobs, [&](std::size_t j) {
        auto& grads = buffers[j];
        if (grads.empty()) {
          grads = params.zeros_like();
        } else {
          for (auto& g : grads) g.fill(T(0));
        }
        Graph<T> g(true, mix_seed(config.seed, step, j));
        const EncodedExample& ex = train_set[order[start + j]];
        Var loss = g.cross_entropy(model.logits(g, ex), ex.gold);
        losses[j] = static_cast<double>(g.value(loss)[0]);
        g.backward(loss);
        g.accumulate_param_grads(grads);
      });

      double batch_loss = 0;
      for (std::size_t j = 0; j < count; ++j) batch_loss += losses[j];
      if (!std::isfinite(batch_loss)) {
        fail(ErrorKind::kTraining, "loss became non-finite at step " + std::to_string(step) +
                                       " (epoch " + std::to_string(epoch + 1) + ")");
      }
      epoch_loss += batch_loss;

      const T inv = T(1) / static_cast<T>(count);
      for (std::size_t p = 0; p < params.size(); ++p) {
        auto dst = params[p].grad.values();
        std::fill(dst.begin(), dst.end(), T(0));
        for (std::size_t j = 0; j < count; ++j) {
          auto src = buffers[j][p].values();
          for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        }
        for (auto& v : dst) v *= inv;
      }
      adam_step(params, adam);
      ++step;
    }
    metrics.epoch_loss.push_back(epoch_loss / static_cast<double>(n));

    const bool has_dev = !dev_set.empty();
    const double dev = has_dev ? evaluate(model, dev_set, config.jobs) : 0.0;
    if (has_dev) metrics.dev_accuracy.push_back(dev);
    if (metrics.best_epoch == 0 || !has_dev || dev > metrics.best_dev) {
      metrics.best_epoch = epoch + 1;
      metrics.best_dev = dev;
      if (has_dev) {
        best_values.clear();
        for (const auto& p : params) best_values.push_back(p.value);
      }
    }
  }
  if (!best_values.empty()) {
    for (std::size_t p = 0; p < params.size(); ++p) params[p].value = best_values[p];
  }
  return metrics;
}

std::size_t select_best(const std::vector<GridRow>& rows) {
  if (rows.empty()) fail(ErrorKind::kConfig, "grid is empty");
  std::size_t best = 0;
  auto key = [&](std::size_t i) {
    const auto& c = rows[i].config;
    // Higher dev first, then the tie-break order.
    return std::make_tuple(-rows[i].metrics.best_dev, c.lr, c.batch_size, c.epochs);
  };
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (key(i) < key(best)) best = i;
  }
  return best;
}

template <typename T>
GridResult grid_search(const ModelConfig& model_config, const Grid& grid,
                       const TrainConfig& base, const std::vector<EncodedExample>& train_set,
                       const std::vector<EncodedExample>& dev_set) {
  if (grid.size() == 0) fail(ErrorKind::kConfig, "grid is empty");
  GridResult result;
  for (const auto& cfg : grid.expand(base)) {
    MhkaModel<T> model(model_config, cfg.seed);
    Metrics m = train(model, train_set, dev_set, cfg);
    result.rows.push_back({cfg, std::move(m)});
  }
  result.best = select_best(result.rows);
  return result;
}

std::vector<std::size_t> subsample_indices(std::size_t n, double fraction,
                                           std::uint64_t seed,
                                           const std::vector<int>* labels) {
  if (!(fraction > 0 && fraction <= 1)) {
    fail(ErrorKind::kData, "fraction must lie in (0, 1]");
  }
  if (labels && labels->size() != n) {
    fail(ErrorKind::kContract, "label count does not match the data");
  }
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (fraction == 1.0) return all;
  const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (target == 0) {
    fail(ErrorKind::kData, "fraction " + std::to_string(fraction) + " of " +
                               std::to_string(n) + " instances is empty");
  }
  Rng rng(mix_seed(seed, 0x73756273ULL));
  std::vector<std::size_t> out;
  if (!labels) {
    std::shuffle(all.begin(), all.end(), rng);
    out.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(target));
  } else {
    std::vector<int> classes(labels->begin(), labels->end());
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < n; ++i) {
        if ((*labels)[i] == classes[c]) members.push_back(i);
      }
      // Largest-remainder share; the last class takes what is left.
      std::size_t take =
          c + 1 == classes.size()
              ? target - assigned
              : static_cast<std::size_t>(std::llround(static_cast<double>(target) *
                                                      static_cast<double>(members.size()) /
                                                      static_cast<double>(n)));
      take = std::min(take, members.size());
      std::shuffle(members.begin(), members.end(), rng);
      out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
      assigned += take;
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) fail(ErrorKind::kData, "subsample is empty");
  return out;
}

std::vector<AlphaNliInstance> subsample(const std::vector<AlphaNliInstance>& data,
                                        double fraction, std::uint64_t seed) {
  std::vector<AlphaNliInstance> out;
  for (std::size_t i : subsample_indices(data.size(), fraction, seed)) out.push_back(data[i]);
  return out;
}

std::vector<CipInstance> subsample(const std::vector<CipInstance>& data, double fraction,
                                   std::uint64_t seed) {
  std::vector<int> labels;
  for (const auto& x : data) labels.push_back(x.gold_yes ? 1 : 0);
  std::vector<CipInstance> out;
  for (std::size_t i : subsample_indices(data.size(), fraction, seed, &labels)) {
    out.push_back(data[i]);
  }
  return out;
}

nlohmann::json SeedSummary::to_json() const {
  return {{"seeds", seeds}, {"values", values}, {"mean", mean}, {"variance", variance}};
}

SeedSummary seed_average(const std::function<double(std::uint64_t)>& run,
                         const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) fail(ErrorKind::kConfig, "seed list is empty");
  SeedSummary s;
  s.seeds = seeds;
  for (auto seed : seeds) s.values.push_back(run(seed));
  double sum = 0;
  for (double v : s.values) sum += v;
  s.mean = sum / static_cast<double>(s.values.size());
  double sq = 0;
  for (double v : s.values) sq += (v - s.mean) * (v - s.mean);
  s.variance = sq / static_cast<double>(s.values.size());
  return s;
}

template <typename T>
LoadedModel<T> load_for_transfer(const std::filesystem::path& checkpoint,
                                 std::uint64_t head_seed,
                                 const std::optional<ModelConfig>& expected) {
  LoadedModel<T> loaded = load_model<T>(checkpoint);
  if (expected) {
    nlohmann::json a = loaded.model.config().to_json();
    nlohmann::json b = expected->to_json();
    a.erase("variant");
    b.erase("variant");
    if (a != b) {
      fail(ErrorKind::kCheckpoint, "checkpoint model config " + a.dump() +
                                       " is incompatible with " + b.dump());
    }
  }
  loaded.model.reinit_head(head_seed);
  return loaded;
}

template <typename T>
TransferResult<T> transfer(const std::filesystem::path& cip_checkpoint,
                           const std::vector<AlphaNliInstance>& alpha_train,
                           const std::vector<AlphaNliInstance>& alpha_dev,
                           const TrainConfig& config,
                           const std::optional<ModelConfig>& expected) {
  LoadedModel<T> loaded = load_for_transfer<T>(cip_checkpoint, config.seed, expected);
  const auto& mc = loaded.model.config();
  const auto train_set = encode_dataset(alpha_train, loaded.vocab, mc);
  const auto dev_set = encode_dataset(alpha_dev, loaded.vocab, mc);
  Metrics m = train(loaded.model, train_set, dev_set, config);
  return {std::move(loaded.model), std::move(m)};
}

nlohmann::json metrics_record(const std::string& run_id, const nlohmann::json& config,
                              std::uint64_t seed, const std::string& split, double accuracy,
                              std::optional<double> mean, std::optional<double> variance) {
  nlohmann::json j = {{"run_id", run_id},
                      {"config", config},
                      {"seed", seed},
                      {"split", split},
                      {"accuracy", accuracy}};
  j["mean"] = mean ? nlohmann::json(*mean) : nlohmann::json(nullptr);
  j["variance"] = variance ? nlohmann::json(*variance) : nlohmann::json(nullptr);
  return j;
}

#define MHKA_INSTANTIATE(T)                                                              \
  template Metrics train(MhkaModel<T>&, const std::vector<EncodedExample>&,             \
                         const std::vector<EncodedExample>&, const TrainConfig&);       \
  template std::vector<std::size_t> predict(const MhkaModel<T>&,                         \
                                            const std::vector<EncodedExample>&, int);   \
  template double evaluate(const MhkaModel<T>&, const std::vector<EncodedExample>&, int); \
  template GridResult grid_search<T>(const ModelConfig&, const Grid&, const TrainConfig&, \
                                     const std::vector<EncodedExample>&,                 \
                                     const std::vector<EncodedExample>&);                \
  template LoadedModel<T> load_for_transfer<T>(const std::filesystem::path&,             \
                                               std::uint64_t,                            \
                                               const std::optional<ModelConfig>&);       \
  template TransferResult<T> transfer<T>(                                                \
      const std::filesystem::path&, const std::vector<AlphaNliInstance>&,                \
      const std::vector<AlphaNliInstance>&, const TrainConfig&,                          \
      const std::optional<ModelConfig>&);

MHKA_INSTANTIATE(float)
MHKA_INSTANTIATE(double)
#undef MHKA_INSTANTIATE

}  // namespace mhka
