#include <benchmark/benchmark.h>

#include "cvp/replay.hpp"
#include "cvp/selection.hpp"
#include "cvp/simulate.hpp"
#include "cvp/voting.hpp"

namespace {

using namespace cvp;

SimConfig bench_cfg(int items, int events) {
  SimConfig cfg;
  cfg.selection.tau = 1.2;
  cfg.selection.alpha = 0.5;
  cfg.lambda = 2.0;
  cfg.mu = -1.0;
  cfg.sigma2 = 1.0;
  cfg.nu = NuSpec{0.0, 0.5};
  cfg.items = items;
  cfg.events_per_item = events;
  cfg.seed = 12345;
  return cfg;
}

void BM_simulate(benchmark::State& state) {
  const SimConfig cfg = bench_cfg(static_cast<int>(state.range(0)), 60);
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_community(cfg));
  }
}
BENCHMARK(BM_simulate)->Arg(10)->Arg(100);

void BM_replay(benchmark::State& state) {
  const SimResult sim = simulate_community(bench_cfg(static_cast<int>(state.range(0)), 60));
  const UrnConfig urn{1, 1, 1};
  for (auto _ : state) {
    for (const auto& item : sim.dataset.items) benchmark::DoNotOptimize(replay(item, urn));
  }
}
BENCHMARK(BM_replay)->Arg(10)->Arg(100);

void BM_voting_objective(benchmark::State& state) {
  const SimResult sim = simulate_community(bench_cfg(static_cast<int>(state.range(0)), 60));
  const VotingDesign design = VotingDesign::build(sim.dataset, UrnConfig{1, 1, 1});
  FitOptions opts;
  VotingObjective obj(design, FeatureMask::all(), 1.0, opts);
  std::vector<double> x(obj.dim(), 0.1), grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(obj.eval(x, grad));
  }
}
BENCHMARK(BM_voting_objective)->Arg(100)->Arg(200);

void BM_fit_voting(benchmark::State& state) {
  const SimResult sim = simulate_community(bench_cfg(static_cast<int>(state.range(0)), 60));
  const UrnConfig urn{1, 1, 1};
  VotingParams init;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_voting(sim.dataset, urn, init));
  }
}
BENCHMARK(BM_fit_voting)->Arg(50);

void BM_fit_tau(benchmark::State& state) {
  const SimResult sim = simulate_community(bench_cfg(static_cast<int>(state.range(0)), 60));
  const SelectionDesign design = SelectionDesign::build(sim.dataset, RankBase::Zero);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_tau(design, 0.5));
  }
}
BENCHMARK(BM_fit_tau)->Arg(100)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
