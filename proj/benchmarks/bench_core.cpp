#include <benchmark/benchmark.h>

#include "wtl/fit.hpp"
#include "wtl/histogram.hpp"
#include "wtl/model.hpp"
#include "wtl/spatial.hpp"
#include "wtl/synth.hpp"

using namespace wtl;

namespace {

// 5x5 farm at 0.4 km, shared by the pipeline benchmarks
synth::SynthConfig farm(double density) {
  synth::SynthConfig cfg;
  cfg.rng_seed = 3;
  cfg.background_density = density;
  cfg.domain_radius_km = 2.25;
  cfg.region = synth::FieldRegion::kTurbineDisks;
  cfg.turbines.clear();
  for (int a = 0; a < 5; ++a) {
    for (int b = 0; b < 5; ++b) cfg.turbines.push_back({(a - 2) * 0.4, (b - 2) * 0.4, 100.0, 2010});
  }
  return cfg;
}

const synth::SynthOutput& farm_data() {
  static const synth::SynthOutput out = synth::generate(farm(2000.0));
  return out;
}

const std::vector<spatial::MatchedPair>& farm_pairs() {
  static const auto pairs = [] {
    const spatial::TurbineIndex index(farm_data().turbines);
    return spatial::match_strokes(farm_data().strokes, index, {2.0, 1});
  }();
  return pairs;
}

}  // namespace

static void BM_RingCounts(benchmark::State& state) {
  const model::ModelParams p{2500, 0.5, 0.045, 0.1};
  double r = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(model::ring_counts(r, 0.02, p));
    r = r > 2.0 ? 0.01 : r + 0.02;
  }
}
BENCHMARK(BM_RingCounts);

static void BM_Generate(benchmark::State& state) {
  const auto cfg = farm(2000.0);
  for (auto _ : state) benchmark::DoNotOptimize(synth::generate(cfg, static_cast<unsigned>(state.range(0))));
}
BENCHMARK(BM_Generate)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

static void BM_Match(benchmark::State& state) {
  const auto& data = farm_data();
  const spatial::TurbineIndex index(data.turbines);
  for (auto _ : state) {
    benchmark::DoNotOptimize(spatial::match_strokes(data.strokes, index, {2.0, static_cast<unsigned>(state.range(0))}));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.strokes.size()));
}
BENCHMARK(BM_Match)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

static void BM_Accumulate(benchmark::State& state) {
  const auto& pairs = farm_pairs();
  const hist::WeightFunction w(model::ModelParams{2000, 0.5, 0.045, 0.1});
  for (auto _ : state) benchmark::DoNotOptimize(hist::accumulate(pairs, w));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pairs.size()));
}
BENCHMARK(BM_Accumulate)->Unit(benchmark::kMillisecond);

static void BM_SolveLm(benchmark::State& state) {
  const auto h = hist::accumulate(farm_pairs(), hist::WeightFunction{});
  const auto start = fit::initial_guess(h);
  for (auto _ : state) benchmark::DoNotOptimize(fit::solve_lm(h, start));
}
BENCHMARK(BM_SolveLm)->Unit(benchmark::kMicrosecond);

static void BM_IterativeFit(benchmark::State& state) {
  const auto& pairs = farm_pairs();
  for (auto _ : state) benchmark::DoNotOptimize(fit::iterative_fit(pairs));
}
BENCHMARK(BM_IterativeFit)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
