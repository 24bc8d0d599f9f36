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

// Training, evaluation and the experiment protocols built on them.
//
// Mini-batches are processed instance-parallel: every instance gets its own
// graph and gradient buffer, and buffers are summed in index order, so the
// result does not depend on the number of threads.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mhka/model.hpp"

namespace mhka {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 8;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  double train_fraction = 1.0;
  // Worker cap; 0 keeps the OpenMP default.
  int jobs = 0;

  void validate() const;
  nlohmann::json to_json() const;
  // Missing fields keep their defaults; unknown fields are a config error.
  static TrainConfig from_json(const nlohmann::json& j);
};

struct Grid {
  std::vector<double> lr;
  std::vector<std::size_t> batch_size;
  std::vector<std::size_t> epochs;

  // {1e-5, 2e-5, 5e-6} x {4, 8} x {3, 5, 10}: sized for pretrained encoders.
  static Grid pretrained();
  // {1e-4, 3e-4, 1e-3} x {4, 8} x {3, 5, 10}: sized for from-scratch models.
  static Grid desk();
  static Grid from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  std::size_t size() const { return lr.size() * batch_size.size() * epochs.size(); }
  // Cells in lr-major, then batch, then epoch order.
  std::vector<TrainConfig> expand(const TrainConfig& base) const;
};

struct Metrics {
  std::vector<double> epoch_loss;
  std::vector<double> dev_accuracy;  // empty without a dev set
  std::size_t best_epoch = 0;        // 1-based; 0 when no epoch ran
  double best_dev = 0;
  std::optional<double> test_accuracy;

  nlohmann::json to_json() const;
};

template <typename T>
Metrics train(MhkaModel<T>& model, const std::vector<EncodedExample>& train_set,
              const std::vector<EncodedExample>& dev_set, const TrainConfig& config);

template <typename T>
std::vector<std::size_t> predict(const MhkaModel<T>& model,
                                 const std::vector<EncodedExample>& data, int jobs = 0);

template <typename T>
double evaluate(const MhkaModel<T>& model, const std::vector<EncodedExample>& data,
                int jobs = 0);

struct GridRow {
  TrainConfig config;
  Metrics metrics;
};

struct GridResult {
  std::vector<GridRow> rows;
  std::size_t best = 0;
};

// Best dev accuracy; ties go to the lower lr, then smaller batch, then fewer
// epochs.
std::size_t select_best(const std::vector<GridRow>& rows);

template <typename T>
GridResult grid_search(const ModelConfig& model_config, const Grid& grid,
                       const TrainConfig& base, const std::vector<EncodedExample>& train_set,
                       const std::vector<EncodedExample>& dev_set);

// round(fraction * n) indices, uniform without replacement, ascending.
// With labels the sample is stratified. fraction 1 returns every index.
std::vector<std::size_t> subsample_indices(std::size_t n, double fraction,
                                           std::uint64_t seed,
                                           const std::vector<int>* labels = nullptr);

std::vector<AlphaNliInstance> subsample(const std::vector<AlphaNliInstance>& data,
                                        double fraction, std::uint64_t seed);
std::vector<CipInstance> subsample(const std::vector<CipInstance>& data, double fraction,
                                   std::uint64_t seed);

struct SeedSummary {
  std::vector<std::uint64_t> seeds;
  std::vector<double> values;
  double mean = 0;
  double variance = 0;  // population variance

  nlohmann::json to_json() const;
};

SeedSummary seed_average(const std::function<double(std::uint64_t)>& run,
                         const std::vector<std::uint64_t>& seeds);

// Loads every non-head parameter from a model checkpoint and draws a fresh
// head. `expected`, when given, must agree on everything but the variant.
template <typename T>
LoadedModel<T> load_for_transfer(const std::filesystem::path& checkpoint,
                                 std::uint64_t head_seed,
                                 const std::optional<ModelConfig>& expected = std::nullopt);

template <typename T>
struct TransferResult {
  MhkaModel<T> model;
  Metrics metrics;
};

template <typename T>
TransferResult<T> transfer(const std::filesystem::path& cip_checkpoint,
                           const std::vector<AlphaNliInstance>& alpha_train,
                           const std::vector<AlphaNliInstance>& alpha_dev,
                           const TrainConfig& config,
                           const std::optional<ModelConfig>& expected = std::nullopt);

// One metrics report line.
nlohmann::json metrics_record(const std::string& run_id, const nlohmann::json& config,
                              std::uint64_t seed, const std::string& split, double accuracy,
                              std::optional<double> mean = std::nullopt,
                              std::optional<double> variance = std::nullopt);

}  // namespace mhka
