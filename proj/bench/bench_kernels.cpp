#include <benchmark/benchmark.h>

#include "cpmmd/datagen.hpp"
#include "cpmmd/kernels.hpp"
#include "cpmmd/pipeline.hpp"

namespace {

using namespace cpmmd;

TwoSampleData bench_data(benchmark::State& state) {
  const auto n = static_cast<Index>(state.range(0));
  return sample_pair(GaussianMeanShift{20, 0.5}, n, n, 7);
}

void BM_GramBlocksParallel(benchmark::State& state) {
  const auto data = bench_data(state);
  const CompositeKernel k{KernelSpec::gaussian(), LinearMap{3.0, 20}};
  for (auto _ : state) benchmark::DoNotOptimize(gram_blocks(k, data.x, data.y));
}

void BM_GramBlocksSerial(benchmark::State& state) {
  const auto data = bench_data(state);
  const CompositeKernel k{KernelSpec::gaussian(), LinearMap{3.0, 20}};
  for (auto _ : state) benchmark::DoNotOptimize(serial::gram_blocks(k, data.x, data.y));
}

void BM_PermutationsParallel(benchmark::State& state) {
  const auto data = bench_data(state);
  const Matrix K = pooled_gram({KernelSpec::gaussian(), LinearMap{3.0, 20}}, data.x, data.y);
  for (auto _ : state) benchmark::DoNotOptimize(permutation_statistics(K, data.x.rows(), 200, 11));
}

void BM_PermutationsSerial(benchmark::State& state) {
  const auto data = bench_data(state);
  const Matrix K = pooled_gram({KernelSpec::gaussian(), LinearMap{3.0, 20}}, data.x, data.y);
  for (auto _ : state) benchmark::DoNotOptimize(serial::permutation_statistics(K, data.x.rows(), 200, 11));
}

}  // namespace

BENCHMARK(BM_GramBlocksParallel)->Arg(100)->Arg(400)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GramBlocksSerial)->Arg(100)->Arg(400)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PermutationsParallel)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PermutationsSerial)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
