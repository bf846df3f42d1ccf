// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "fbaec/bwe.h"
#include "fbaec/spectral.h"

namespace fbaec {
namespace {

AudioBuffer Noise(std::size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> dist(0.0, 0.1);
  AudioBuffer a{std::vector<double>(n), 48000};
  for (double& v : a.samples) v = dist(rng);
  return a;
}

const FrameGrid kGrid = FrameGrid::ForSampleRate(48000);

void BM_Analyze(benchmark::State& state) {
  const AudioBuffer x = Noise(48000 * state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(Analyze(x, kGrid));
  state.SetItemsProcessed(state.iterations() * x.size());
}

void BM_AnalyzeSerial(benchmark::State& state) {
  const AudioBuffer x = Noise(48000 * state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(serial::Analyze(x, kGrid));
  state.SetItemsProcessed(state.iterations() * x.size());
}

void BM_Synthesize(benchmark::State& state) {
  const std::vector<SpectralFrame> frames =
      Analyze(Noise(48000 * state.range(0)), kGrid);
  for (auto _ : state) benchmark::DoNotOptimize(Synthesize(frames, kGrid));
}

void BM_SynthesizeSerial(benchmark::State& state) {
  const std::vector<SpectralFrame> frames =
      Analyze(Noise(48000 * state.range(0)), kGrid);
  for (auto _ : state) benchmark::DoNotOptimize(serial::Synthesize(frames, kGrid));
}

void BM_BweForward(benchmark::State& state) {
  const BweWeights w = BweWeights::Random(3, 0.05);
  const std::vector<double> in(kBweInputSize, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(BweForward(w, in));
}

void BM_BweForwardSerial(benchmark::State& state) {
  const BweWeights w = BweWeights::Random(3, 0.05);
  const std::vector<double> in(kBweInputSize, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(serial::BweForward(w, in));
}

BENCHMARK(BM_Analyze)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AnalyzeSerial)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Synthesize)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SynthesizeSerial)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BweForward)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BweForwardSerial)->Unit(benchmark::kMicrosecond);

}  // namespace
}  // namespace fbaec

BENCHMARK_MAIN();
