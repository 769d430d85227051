#include <benchmark/benchmark.h>

#include "cmpbayes/cmp.hpp"
#include "cmpbayes/mcmc.hpp"
#include "cmpbayes/posterior.hpp"
#include "cmpbayes/priors.hpp"
#include "cmpbayes/rng.hpp"

namespace {

using namespace cmpbayes;

// Args are lambda * 10 and nu * 10.
void BM_LogNormalizer(benchmark::State& state) {
  const CmpParams p(state.range(0) / 10.0, state.range(1) / 10.0);
  for (auto _ : state) benchmark::DoNotOptimize(log_normalizer(p));
}
BENCHMARK(BM_LogNormalizer)->Args({40, 10})->Args({30, 5})->Args({30, 20})->Args({100, 5});

void BM_Moments(benchmark::State& state) {
  const CmpParams p(state.range(0) / 10.0, state.range(1) / 10.0);
  for (auto _ : state) benchmark::DoNotOptimize(moments(p));
}
BENCHMARK(BM_Moments)->Args({40, 10})->Args({30, 5})->Args({30, 20});

void BM_LogPosterior(benchmark::State& state) {
  const auto stats = sufficient_stats(sample_cmp(CmpParams(3.0, 0.5), 75, {1, 0}));
  const PriorSpec spec = state.range(0) == 0 ? PriorSpec{ConjugateHyper(1, 1, 1)} : PriorSpec{JeffreysPrior{}};
  const CmpParams p(3.1, 0.55);
  for (auto _ : state) benchmark::DoNotOptimize(log_posterior(spec, stats, p));
}
BENCHMARK(BM_LogPosterior)->Arg(0)->Arg(1);

void BM_SampleCmp(benchmark::State& state) {
  const CmpParams p(3.0, 0.5);
  std::uint64_t stream = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_cmp(p, 1000, {1, stream++}));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_SampleCmp);

void BM_RunChains(benchmark::State& state) {
  const auto stats = sufficient_stats(sample_cmp(CmpParams(3.0, 0.5), 75, {2, 0}));
  const PriorSpec spec = state.range(0) == 0 ? PriorSpec{ConjugateHyper(1, 1, 1)} : PriorSpec{JeffreysPrior{}};
  McmcConfig config;
  config.parallel = false;
  std::uint64_t stream = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_chains(spec, stats, config, {3, stream++}));
}
BENCHMARK(BM_RunChains)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
