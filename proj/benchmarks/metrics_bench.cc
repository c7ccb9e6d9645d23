#include <random>

#include <benchmark/benchmark.h>

#include "greencod/metrics.h"

namespace {

using namespace greencod;

void BM_EvaluateImage(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ProbabilityMap p(size, size);
  GroundTruthMask g(size, size);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto n = static_cast<std::size_t>(size);
    g.values[i] = (i / n > n / 3 && i % n < n / 2) ? 1.0f : 0.0f;
    p.values[i] = std::clamp(0.6f * g.values[i] + 0.5f * u(rng), 0.0f, 1.0f);
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::evaluate_image(p, g));
  state.SetItemsProcessed(state.iterations() * size * size);
}
BENCHMARK(BM_EvaluateImage)->Arg(168)->Arg(672)->Unit(benchmark::kMillisecond);

}  // namespace
