#include <benchmark/benchmark.h>

#include "hkflow/flow.hpp"
#include "hkflow/verify.hpp"

using namespace hkflow;

namespace {

ScalarField sample(const GridPtr& g, double amp) {
  return field_from_modes(g, {{{1, 0, 0, 0}, amp, false}, {{0, 1, 1, 0}, 0.5 * amp, true}});
}

void BM_MixedDerivative(benchmark::State& state) {
  auto g = make_grid(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  ScalarField f = sample(g, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(d_dz_dzbar(f, 0, 0));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g->size()));
}
BENCHMARK(BM_MixedDerivative)->Args({1, 32})->Args({1, 128})->Args({2, 16});

void BM_Riemann(benchmark::State& state) {
  auto g = make_grid(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  MetricField m = metric_from_potential(flat_metric(g), sample(g, 0.01));
  for (auto _ : state) benchmark::DoNotOptimize(riemann(m));
}
BENCHMARK(BM_Riemann)->Args({1, 32})->Args({2, 16});

void BM_LeapfrogStep(benchmark::State& state) {
  auto g = make_grid(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  PotentialFlow flow(flat_metric(g));
  FlowState s = flow.initial(sample(g, 0.01), ScalarField(g));
  flow.prepare(s);
  for (auto _ : state) benchmark::DoNotOptimize(flow.step(s, 1e-3));
}
BENCHMARK(BM_LeapfrogStep)->Args({1, 32})->Args({2, 16});

void BM_IdentitySuite(benchmark::State& state) {
  auto g = make_grid(1, 32);
  PotentialFlow flow(flat_metric(g));
  FlowState s = flow.initial(sample(g, 0.02), ScalarField(g));
  FlowRun run;
  run.dt = 1e-3;
  run.T = 0.2;
  run.snapshot_every = 10;
  run.record_series = false;
  Trajectory traj = integrate_flow(flow, s, run);
  VerifySettings vs;
  vs.sample_times = {0.1};
  for (auto _ : state) benchmark::DoNotOptimize(verify_trajectory(flow, traj, vs));
}
BENCHMARK(BM_IdentitySuite)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
