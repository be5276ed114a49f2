#include <benchmark/benchmark.h>

#include "dan/attention_env.hpp"
#include "dan/rng.hpp"
#include "dan/tracking_env.hpp"

namespace {

using namespace dan;

void BM_GenerateTracks(benchmark::State& state) {
  GridConfig grid;
  const auto cams = default_camera_layout(grid);
  for (auto _ : state)
    benchmark::DoNotOptimize(generate_dataset(grid, cams, static_cast<std::size_t>(state.range(0)), 7));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateTracks)->Arg(500);

void BM_Observe(benchmark::State& state) {
  GridConfig grid;
  const auto cams = default_camera_layout(grid);
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(observe(grid, cams[0], Cell{3, 3}, rng));
}
BENCHMARK(BM_Observe);

void BM_GlyphDataset(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(make_glyph_dataset(5, static_cast<std::size_t>(state.range(0)), 0.05));
}
BENCHMARK(BM_GlyphDataset)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace
