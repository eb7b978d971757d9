// Copyright 2026 The NegMerge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "negmerge/consensus_stream.hpp"
#include "negmerge/merging.hpp"
#include "negmerge/task_vector.hpp"
#include "negmerge/tensor_store.hpp"

namespace negmerge {
namespace {

// Two tensors of `elements` each, N(0, 1) values.
std::vector<TaskVector> make_pool(std::size_t n, std::size_t elements) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<TaskVector> pool(n);
  for (auto& tau : pool) {
    for (const char* name : {"layers.0.weight", "layers.1.weight"}) {
      std::vector<double> v(elements);
      for (auto& x : v) x = normal(rng);
      tau.delta.insert(name, Tensor(DType::kF32, {elements}, std::move(v)));
    }
  }
  return pool;
}

void BM_NegMerge(benchmark::State& state) {
  const auto pool = make_pool(static_cast<std::size_t>(state.range(0)),
                              static_cast<std::size_t>(state.range(1)));
  const Exec exec{static_cast<unsigned>(state.range(2))};
  for (auto _ : state) {
    benchmark::DoNotOptimize(merge_negmerge(pool, MergeSpec{}, exec));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) *
                          state.range(1) * 2);
}
BENCHMARK(BM_NegMerge)
    ->Args({10, 1 << 16, 1})
    ->Args({10, 1 << 20, 1})
    ->Args({10, 1 << 20, 4})
    ->Unit(benchmark::kMillisecond);

void BM_StreamingUpdate(benchmark::State& state) {
  const auto pool = make_pool(4, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    SignConsensusState s(pool[0].schema());
    for (const auto& tau : pool) s.update(tau);
    benchmark::DoNotOptimize(s.finalize());
  }
  state.SetItemsProcessed(state.iterations() * 4 * state.range(0) * 2);
}
BENCHMARK(BM_StreamingUpdate)->Arg(1 << 16)->Arg(1 << 20)->Unit(
    benchmark::kMillisecond);

void BM_Comparator(benchmark::State& state) {
  const auto pool = make_pool(10, 1 << 16);
  MergeSpec spec;
  spec.method = static_cast<MergeMethod>(state.range(0));
  state.SetLabel(std::string(to_string(spec.method)));
  for (auto _ : state) benchmark::DoNotOptimize(merge(pool, spec));
}
BENCHMARK(BM_Comparator)->DenseRange(0, 4)->Unit(benchmark::kMillisecond);

void BM_ApplySparse(benchmark::State& state) {
  auto pool = make_pool(3, 1 << 18);
  const TaskVector merged = merge_negmerge(pool, MergeSpec{});
  const SparseTaskVector sparse = sparsify(merged);
  const TensorMap& base = pool[0].delta;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        apply_sparse(base, sparse, {0.5, Direction::kNegate}));
  }
}
BENCHMARK(BM_ApplySparse)->Unit(benchmark::kMillisecond);

void BM_ContainerEncode(benchmark::State& state) {
  const auto pool = make_pool(1, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(encode(pool[0].delta));
  state.SetBytesProcessed(state.iterations() * state.range(0) * 2 * 4);
}
BENCHMARK(BM_ContainerEncode)->Arg(1 << 20);

}  // namespace
}  // namespace negmerge

BENCHMARK_MAIN();
