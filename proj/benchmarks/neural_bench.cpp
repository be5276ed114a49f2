#include <benchmark/benchmark.h>

#include "dan/neural.hpp"

namespace {

using namespace dan;

NetworkSpec q_like(int input, int hidden) {
  return {input, {LayerSpec::dense(hidden), LayerSpec::relu(), LayerSpec::recurrent(hidden), LayerSpec::output(4)}, 0.0};
}

dan::Sequence random_sequence(int rows, int batch, std::size_t steps) {
  dan::Sequence seq;
  for (std::size_t t = 0; t < steps; ++t) seq.push_back(Eigen::MatrixXd::Random(rows, batch));
  return seq;
}

void BM_Forward(benchmark::State& state) {
  const auto spec = q_like(26, static_cast<int>(state.range(0)));
  const auto params = init_parameters(spec, 1);
  const auto seq = random_sequence(26, 4, 12);
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, spec, seq));
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(64);

void BM_ForwardBackward(benchmark::State& state) {
  const auto spec = q_like(26, static_cast<int>(state.range(0)));
  const auto params = init_parameters(spec, 1);
  const auto seq = random_sequence(26, 4, 12);
  const auto grads = random_sequence(4, 4, 12);
  for (auto _ : state) {
    const auto trace = forward(params, spec, seq, ForwardMode::kTrain, 3);
    benchmark::DoNotOptimize(backward(params, spec, trace, grads));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(64);

void BM_ForwardStep(benchmark::State& state) {
  const auto spec = q_like(26, 32);
  const auto params = init_parameters(spec, 1);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(26, 1);
  RecurrentState h;
  for (auto _ : state) benchmark::DoNotOptimize(forward_step(params, spec, x, h));
}
BENCHMARK(BM_ForwardStep);

}  // namespace
