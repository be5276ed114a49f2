#include <algorithm>

#include <benchmark/benchmark.h>

#include "dan/belief_engine.hpp"
#include "dan/convex_bounds.hpp"
#include "dan/tracking_env.hpp"

namespace {

using namespace dan;

void BM_BayesUpdateAxis(benchmark::State& state) {
  GridConfig grid;
  grid.width = grid.height = static_cast<int>(state.range(0));
  grid.n_cameras = 4;
  const auto cams = default_camera_layout(grid);
  const auto model = factored_model(grid, cams, Axis::kX);
  const Belief b = Belief::uniform(model.n_targets());
  const auto dist = observation_distribution(predict(b, model), 0, model);
  const auto z = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
  for (auto _ : state) benchmark::DoNotOptimize(bayes_update(b, 0, z, model));
}
BENCHMARK(BM_BayesUpdateAxis)->Arg(10)->Arg(50);

void BM_ExpectedInfoGain(benchmark::State& state) {
  GridConfig grid;
  grid.width = grid.height = static_cast<int>(state.range(0));
  const auto cams = default_camera_layout(grid);
  const auto model = factored_model(grid, cams, Axis::kX);
  const Belief b = Belief::uniform(model.n_targets());
  for (auto _ : state) benchmark::DoNotOptimize(expected_info_gain(b, 1, model));
}
BENCHMARK(BM_ExpectedInfoGain)->Arg(10)->Arg(50);

void BM_VerifyBoundRandom(benchmark::State& state) {
  const PredictionRewardSpec spec{1.0, 0.0, static_cast<std::size_t>(state.range(0))};
  const Sampler sampler = parse_sampler("random:10000", 1);
  for (auto _ : state) benchmark::DoNotOptimize(verify_bound_sweep(spec, sampler));
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_VerifyBoundRandom)->Arg(3)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_ClosedFormBound(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const PredictionRewardSpec spec{1.0, 0.0, n};
  const Belief b = Belief::uniform(n);
  for (auto _ : state) benchmark::DoNotOptimize(closed_form_01_bound(b, spec));
}
BENCHMARK(BM_ClosedFormBound)->Arg(10)->Arg(100);

}  // namespace
