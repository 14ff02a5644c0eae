// Serial reference vs OpenMP kernels on one corridor scan pair.

#include <benchmark/benchmark.h>

#include "rfusion/scan_match.hpp"
#include "rfusion/scenario.hpp"

using namespace rfusion;

namespace {

struct Fixture {
  sim::Scenario scenario;
  sim::World world;
  ScanFrame source;
  ScanFrame target;

  Fixture() : scenario(short_scenario()), world(sim::build_world(scenario)) {
    source = sim::synth_scenario_scan(scenario, world, 10);
    target = sim::synth_scenario_scan(scenario, world, 11);
  }

  static sim::Scenario short_scenario() {
    sim::Scenario s = sim::named_scenario("corridor01-synth");
    s.duration = 4.0;
    s.schedule.clear();
    return s;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_CorrespondencesSerial(benchmark::State& state) {
  const auto& f = fixture();
  const KdTree index(f.target);
  for (auto _ : state) benchmark::DoNotOptimize(find_correspondences_serial(f.source.points, index, 1.0));
}

void BM_CorrespondencesParallel(benchmark::State& state) {
  const auto& f = fixture();
  const KdTree index(f.target);
  for (auto _ : state) benchmark::DoNotOptimize(find_correspondences(f.source.points, index, 1.0));
}

void BM_FeatureCountSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(extract_feature_count_serial(f.source));
}

void BM_FeatureCountParallel(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(extract_feature_count(f.source));
}

void BM_ScanSynthesisSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(sim::synth_scans_serial(f.scenario, f.world));
}

void BM_ScanSynthesisParallel(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(sim::synth_scans(f.scenario, f.world));
}

}  // namespace

BENCHMARK(BM_CorrespondencesSerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_CorrespondencesParallel)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FeatureCountSerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FeatureCountParallel)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ScanSynthesisSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScanSynthesisParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
