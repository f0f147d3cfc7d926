#include <benchmark/benchmark.h>

#include "wtdchain/statistics.hpp"

namespace {

using namespace wtdchain;

ChainSpec chain(Eigen::Index sites) {
  return ChainSpec{build_tight_binding(sites, 1.0, 1.0), 0.1, 0.1, 1.0, 0.0};
}

void BM_Expm(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const CMatrix q = derive_single_particle(chain(n)).Q * 37.0;
  for (auto _ : state) benchmark::DoNotOptimize(expm(-q));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Expm)->Arg(10)->Arg(50)->Arg(100)->Arg(200)->Complexity();

void BM_Lyapunov(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const SingleParticleSet sp = derive_single_particle(chain(n));
  for (auto _ : state) benchmark::DoNotOptimize(lyapunov_solve(sp.W, sp.F));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Lyapunov)->Arg(10)->Arg(50)->Arg(100)->Arg(200)->Complexity();

// All sixteen densities at one time, steady state prepared once.
void BM_WtdTable(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const ChainSpec spec = chain(n);
  const WtdEvaluator evaluator(spec, steady_state(spec));
  for (auto _ : state) benchmark::DoNotOptimize(evaluator.evaluate(100.0));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_WtdTable)->Arg(10)->Arg(50)->Arg(100)->Arg(200)->Complexity();

// One density from scratch, including the state factorization.
void BM_WtdDensity(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const ChainSpec spec = chain(n);
  const GaussianState ss = steady_state(spec);
  const Channel to{Site::Last, Jump::Extract};
  const Channel from{Site::First, Jump::Inject};
  for (auto _ : state) benchmark::DoNotOptimize(wtd_density(100.0, to, from, ss, spec));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_WtdDensity)->Arg(10)->Arg(50)->Arg(100)->Arg(200)->Complexity();

void BM_VacuumDensity(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const ChainSpec spec = chain(n);
  const Channel to{Site::Last, Jump::Extract};
  const Channel from{Site::First, Jump::Inject};
  for (auto _ : state) benchmark::DoNotOptimize(wtd_density_vacuum(100.0, to, from, spec));
}
BENCHMARK(BM_VacuumDensity)->Arg(10)->Arg(50)->Arg(100);

void BM_ChannelStatistics(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const ChainSpec spec = chain(n);
  const WtdEvaluator evaluator(spec, steady_state(spec));
  for (auto _ : state) benchmark::DoNotOptimize(channel_statistics(evaluator));
}
BENCHMARK(BM_ChannelStatistics)->Arg(2)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
