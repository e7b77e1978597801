#include <benchmark/benchmark.h>

#include "rblt/rblt.hpp"

using namespace rblt;

namespace {

ModelParams bench_params(std::size_t vocab, std::size_t dim) { return initialize_params(vocab, 11, dim, 1); }

void BM_Energy(benchmark::State& state) {
  const auto kind = static_cast<EnergyKind>(state.range(1));
  const auto p = bench_params(1000, static_cast<std::size_t>(state.range(0)));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(energy(p, kind, WordId{i % 1000}, RelId{i % 11}, WordId{(i * 7) % 1000}));
    ++i;
  }
}
BENCHMARK(BM_Energy)->ArgsProduct({{10, 100}, {0, 1, 2}});

void BM_EnergyGrad(benchmark::State& state) {
  const auto p = bench_params(1000, static_cast<std::size_t>(state.range(0)));
  auto out = GradientAccumulator::zeros_like(p);
  for (auto _ : state) {
    accumulate_energy_grad(p, EnergyKind::Cosine, WordId{3}, RelId{2}, WordId{5}, 1.0, out);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_EnergyGrad)->Arg(10)->Arg(100);

void BM_GibbsSweep(benchmark::State& state) {
  const auto vocab = static_cast<std::size_t>(state.range(0));
  const auto p = bench_params(vocab, 100);
  Rng rng(1);
  ChainState s{WordId{0}, RelId{0}, WordId{1}};
  for (auto _ : state) s = gibbs_sweep(p, EnergyKind::Cosine, s, rng);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GibbsSweep)->RangeMultiplier(4)->Range(256, 16384)->Complexity(benchmark::oN);

void BM_PcdStep(benchmark::State& state) {
  const auto p = bench_params(2000, 100);
  std::vector<Triple> batch;
  for (std::size_t i = 0; i < 100; ++i) batch.push_back(make_triple(i * 13 % 2000, i % 11, i * 31 % 2000));
  auto pool = ChainPool::seed_from_data(p, EnergyKind::Cosine, batch, static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(pcd_gradient(p, EnergyKind::Cosine, batch, pool, 3));
}
BENCHMARK(BM_PcdStep)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
