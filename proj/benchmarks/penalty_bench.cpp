#include <benchmark/benchmark.h>

#include <random>

#include "ms3d/gan.hpp"
#include "ms3d/rgflow.hpp"

namespace {

ms3d::ad::Tensor batch(std::size_t n, std::size_t side) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n * side * side);
  for (auto& x : v) x = u(rng);
  return ms3d::ad::Tensor::from({n, side, side}, std::move(v));
}

ms3d::gan::GanModel model(std::size_t side) {
  ms3d::gan::ModelSpec spec;
  spec.height = spec.width = side;
  return ms3d::gan::make_model(spec, 1);
}

// Penalty value only.
void BM_PenaltyForward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto m = model(side);
  const auto x = batch(16, side);
  const ms3d::rg::Critic critic = [&](const ms3d::ad::Tensor& t) { return m.discriminator.forward(t); };
  for (auto _ : state) benchmark::DoNotOptimize(ms3d::rg::ms3d_penalty(x, critic).item());
}
BENCHMARK(BM_PenaltyForward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

// Penalty plus its parameter gradient (double backprop).
void BM_PenaltyGradient(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto m = model(side);
  const auto x = batch(16, side);
  const ms3d::rg::Critic critic = [&](const ms3d::ad::Tensor& t) { return m.discriminator.forward(t); };
  const auto params = m.discriminator.params();
  for (auto _ : state) {
    auto g = ms3d::ad::grad(ms3d::rg::ms3d_penalty(x, critic), params);
    benchmark::DoNotOptimize(g[0].at(0));
  }
}
BENCHMARK(BM_PenaltyGradient)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
