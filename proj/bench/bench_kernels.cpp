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

#include <benchmark/benchmark.h>

#include <vector>

#include "mhka/kernels.hpp"
#include "mhka/parameters.hpp"

namespace {

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
  mhka::Rng rng(seed);
  std::normal_distribution<float> d(0.f, 1.f);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

template <bool kReference>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (kReference) {
      mhka::kernels::reference::gemm<float>(n, n, n, a.data(), b.data(), c.data(), false);
    } else {
      mhka::kernels::gemm<float>(n, n, n, a.data(), b.data(), c.data(), false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Gemm<false>)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Arg(64)->Arg(128)->Arg(256);

template <bool kReference>
void BM_Attention(benchmark::State& state) {
  const auto nq = static_cast<std::size_t>(state.range(0));
  const auto nk = static_cast<std::size_t>(state.range(1));
  const std::size_t d = 64, heads = 4;
  const auto q = random_vec(nq * d, 3), k = random_vec(nk * d, 4), v = random_vec(nk * d, 5);
  std::vector<float> out(nq * d), w(heads * nq * nk);
  for (auto _ : state) {
    if constexpr (kReference) {
      mhka::kernels::reference::attention_forward<float>(nq, nk, d, heads, false, q.data(),
                                                         k.data(), v.data(), out.data(),
                                                         w.data());
    } else {
      mhka::kernels::attention_forward<float>(nq, nk, d, heads, false, q.data(), k.data(),
                                              v.data(), out.data(), w.data());
    }
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Attention<false>)->Args({48, 48})->Args({48, 256});
BENCHMARK(BM_Attention<true>)->Args({48, 48})->Args({48, 256});

}  // namespace

BENCHMARK_MAIN();
