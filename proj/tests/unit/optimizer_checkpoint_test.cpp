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

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mhka/checkpoint.hpp"
#include "mhka/error.hpp"
#include "mhka/optimizer.hpp"

namespace mhka {
namespace {

namespace fs = std::filesystem;

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "mhka_unit";
  fs::create_directories(dir);
  return dir / name;
}

TEST(Adam, FirstStepMovesByLearningRateTimesSign) {
  Tensor<double> p = Tensor<double>::vector({1.0, -2.0, 0.5});
  const Tensor<double> g = Tensor<double>::vector({0.5, -3.0, 1e-3});
  AdamState<double> state(0.1);
  std::vector<Tensor<double>*> ps = {&p};
  std::vector<const Tensor<double>*> gs = {&g};
  adam_step<double>(ps, gs, state);
  EXPECT_EQ(state.step, 1u);
  EXPECT_NEAR(p[0], 0.9, 1e-6);
  EXPECT_NEAR(p[1], -1.9, 1e-6);
  EXPECT_NEAR(p[2], 0.4, 1e-4);
}

TEST(Adam, SecondStepUsesBiasCorrectedMoments) {
  Tensor<double> p = Tensor<double>::vector({0.0});
  Tensor<double> g = Tensor<double>::vector({1.0});
  AdamState<double> state(0.01);
  std::vector<Tensor<double>*> ps = {&p};
  std::vector<const Tensor<double>*> gs = {&g};
  adam_step<double>(ps, gs, state);
  g[0] = -1.0;
  adam_step<double>(ps, gs, state);
  const double m = (0.9 * 0.1 - 0.1) / (1 - 0.81);
  const double v = (0.999 * 0.001 + 0.001) / (1 - 0.999 * 0.999);
  EXPECT_NEAR(p[0], -0.01 / (1 + 1e-8) - 0.01 * m / (std::sqrt(v) + 1e-8), 1e-15);
}

TEST(Adam, RejectsBadHyperparameters) {
  Tensor<double> p({2});
  Tensor<double> g({2});
  std::vector<Tensor<double>*> ps = {&p};
  std::vector<const Tensor<double>*> gs = {&g};
  for (AdamState<double> s : {AdamState<double>(0.0), AdamState<double>(0.1, 1.0),
                              AdamState<double>(0.1, 0.9, 0.999, 0.0)}) {
    try {
      adam_step<double>(ps, gs, s);
      FAIL() << "expected a parameter error";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kParameter);
    }
  }
}

TEST(Adam, FrozenParametersDoNotMove) {
  ParameterStore<double> store;
  store.add("a", Tensor<double>::vector({1.0}));
  store.add("b", Tensor<double>::vector({1.0}));
  store[0].grad[0] = 1.0;
  store[1].grad[0] = 1.0;
  store[1].requires_grad = false;
  AdamState<double> state(0.1);
  adam_step(store, state);
  EXPECT_LT(store[0].value[0], 1.0);
  EXPECT_EQ(store[1].value[0], 1.0);
}

template <typename T>
ParameterStore<T> random_store(std::uint64_t seed) {
  Rng rng(seed);
  ParameterStore<T> store;
  store.add("embed", normal_tensor<T>({7, 3}, T(0.5), rng));
  store.add("bias", normal_tensor<T>({3}, T(2), rng));
  store.add("scalar", Tensor<T>::scalar(T(1) / T(3)));
  return store;
}

TEST(Checkpoint, RoundTripIsBitExactInBothPrecisions) {
  {
    const auto a = random_store<double>(1);
    const auto path = temp_path("f64.ckpt");
    save_checkpoint(path, a, {{"seed", 1}});
    const Checkpoint c = load_checkpoint(path);
    EXPECT_EQ(c.header["precision"], "f64");
    EXPECT_EQ(c.header["seed"], 1);
    auto b = random_store<double>(2);
    restore_parameters(c, b);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].value, b[i].value);
  }
  {
    const auto a = random_store<float>(3);
    const auto path = temp_path("f32.ckpt");
    save_checkpoint(path, a, nlohmann::json::object());
    auto b = random_store<float>(4);
    restore_parameters(load_checkpoint(path), b);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].value, b[i].value);
  }
}

TEST(Checkpoint, SkipLeavesParametersUntouched) {
  const auto a = random_store<double>(5);
  const auto path = temp_path("skip.ckpt");
  save_checkpoint(path, a, nlohmann::json::object());
  auto b = random_store<double>(6);
  const auto before = b[1].value;
  restore_parameters(load_checkpoint(path), b,
                     [](const std::string& name) { return name == "bias"; });
  EXPECT_EQ(b[0].value, a[0].value);
  EXPECT_EQ(b[1].value, before);
}

TEST(Checkpoint, ShapeMismatchIsCheckpointError) {
  const auto a = random_store<double>(7);
  const auto path = temp_path("shape.ckpt");
  save_checkpoint(path, a, nlohmann::json::object());
  ParameterStore<double> b;
  b.add("embed", Tensor<double>({3, 7}));
  b.add("bias", Tensor<double>({3}));
  b.add("scalar", Tensor<double>({1}));
  try {
    restore_parameters(load_checkpoint(path), b);
    FAIL() << "expected a checkpoint error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCheckpoint);
  }
}

TEST(Checkpoint, MissingParameterIsCheckpointError) {
  const auto a = random_store<double>(8);
  const auto path = temp_path("missing.ckpt");
  save_checkpoint(path, a, nlohmann::json::object());
  auto b = random_store<double>(9);
  b.add("extra", Tensor<double>({2}));
  EXPECT_THROW(restore_parameters(load_checkpoint(path), b), Error);
}

TEST(Checkpoint, CorruptOrMissingFileIsRejected) {
  const auto bad = temp_path("bad.ckpt");
  {
    std::ofstream out(bad, std::ios::binary);
    out << "NOTACKPT and some trailing bytes";
  }
  EXPECT_THROW(load_checkpoint(bad), Error);

  const auto a = random_store<double>(10);
  const auto trunc = temp_path("trunc.ckpt");
  save_checkpoint(trunc, a, nlohmann::json::object());
  fs::resize_file(trunc, fs::file_size(trunc) - 5);
  EXPECT_THROW(load_checkpoint(trunc), Error);

  EXPECT_THROW(load_checkpoint(temp_path("does_not_exist.ckpt")), Error);
}

}  // namespace
}  // namespace mhka
