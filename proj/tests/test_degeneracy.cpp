#include <cmath>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "rfusion/degeneracy.hpp"
#include "rfusion/errors.hpp"
#include "rfusion/rng.hpp"
#include "rfusion/scenario.hpp"

using namespace rfusion;

namespace {

MatchReport report(std::size_t n_feat, double eps) {
  MatchReport r;
  r.n_feat = n_feat;
  r.eps_align = eps;
  r.converged = std::isfinite(eps);
  return r;
}

std::vector<int> run_debounce(const std::vector<int>& raw, int on, int off) {
  DetectorConfig c;
  c.debounce_on = on;
  c.debounce_off = off;
  DegeneracyDetector d(c);
  std::vector<int> out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out.push_back(d.step(0.2 * static_cast<double>(i), raw[i] ? report(0, 0.0) : report(500, 0.0)).debounced);
  }
  return out;
}

}  // namespace

TEST_CASE("raw condition is the OR of the count and residual tests") {
  DetectorConfig c;
  c.tau_n = 100;
  c.tau_eps = 0.10;
  CHECK(evaluate(report(500, 0.02), c) == 0);
  CHECK(evaluate(report(500, 0.14), c) == 1);
  CHECK(evaluate(report(100, 0.14), c) == 1);
  CHECK(evaluate(report(50, 0.01), c) == 1);
  CHECK(evaluate(report(100, 0.10), c) == 0);  // both thresholds are strict
  CHECK(evaluate(report(500, std::numeric_limits<double>::infinity()), c) == 1);
  CHECK(evaluate(report(500, std::nan("")), c) == 1);
}

TEST_CASE("default thresholds separate the published operating points") {
  const DetectorConfig c;
  CHECK(c.tau_eps == 0.09);
  CHECK(evaluate(report(1000, 0.14), c) == 1);  // degraded average matching error
  CHECK(evaluate(report(1000, 0.04), c) == 0);  // baseline average matching error
}

TEST_CASE("evaluate is monotone in both inputs") {
  Rng rng(11);
  DetectorConfig c;
  for (int i = 0; i < 5000; ++i) {
    const auto n = static_cast<std::size_t>(rng.uniform(0.0, 300.0));
    const double eps = rng.uniform(0.0, 0.2);
    if (evaluate(report(n, eps), c) == 0) continue;
    const auto fewer = static_cast<std::size_t>(rng.uniform(0.0, static_cast<double>(n) + 1.0));
    CHECK(evaluate(report(fewer, eps + rng.uniform(0.0, 0.1)), c) == 1);
  }
}

TEST_CASE("optional hessian term") {
  DetectorConfig c;
  MatchReport r = report(500, 0.01);
  r.hessian_min_eig = 0.1;
  CHECK(evaluate(r, c) == 0);
  c.use_hessian = true;
  CHECK(evaluate(r, c) == 1);
}

TEST_CASE("debounce counting") {
  CHECK(run_debounce({1, 1, 1}, 3, 5) == std::vector<int>{0, 0, 1});
  CHECK(run_debounce({1, 0, 1, 0, 1, 0, 1, 0}, 3, 5) == std::vector<int>(8, 0));
  CHECK(run_debounce({1, 1, 1, 0, 0, 0, 0, 0, 0}, 3, 5) == std::vector<int>{0, 0, 1, 1, 1, 1, 1, 0, 0});
  // A negative sample resets the run.
  CHECK(run_debounce({1, 1, 0, 1, 1, 1}, 3, 5) == std::vector<int>{0, 0, 0, 0, 0, 1});
}

TEST_CASE("unit debounce follows the raw flag and runs respect the counts") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> raw;
    for (int i = 0; i < 200; ++i) raw.push_back(rng.uniform() < 0.4 ? 1 : 0);
    CHECK(run_debounce(raw, 1, 1) == raw);

    const int on = 1 + static_cast<int>(rng.uniform(0.0, 4.0));
    const int off = 1 + static_cast<int>(rng.uniform(0.0, 6.0));
    const auto deb = run_debounce(raw, on, off);
    // Measure completed runs (a run is complete when followed by a change).
    std::size_t start = 0;
    for (std::size_t i = 1; i <= deb.size(); ++i) {
      if (i < deb.size() && deb[i] == deb[start]) continue;
      if (i < deb.size()) {
        const auto len = static_cast<int>(i - start);
        if (deb[start] == 1) CHECK(len >= off);
        if (deb[start] == 0 && start > 0) CHECK(len >= on);
      }
      start = i;
    }
  }
}

TEST_CASE("out-of-order samples are a stream error") {
  DegeneracyDetector d;
  d.step(1.0, report(500, 0.0));
  CHECK_THROWS_AS(d.step(1.0, report(500, 0.0)), StreamError);
  CHECK_THROWS_AS(d.step(0.5, report(500, 0.0)), StreamError);
  CHECK_NOTHROW(d.step(1.2, report(500, 0.0)));
}

TEST_CASE("invalid configs are rejected") {
  DetectorConfig c;
  c.tau_eps = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.debounce_on = 0;
  CHECK_THROWS_AS(DegeneracyDetector{c}, std::invalid_argument);
  c = {};
  c.tau_n = -1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("episodes and interval IoU") {
  std::vector<HealthSample> s;
  const int flags[] = {0, 1, 1, 0, 0, 1, 1};
  for (int i = 0; i < 7; ++i) s.push_back({static_cast<double>(i), 0, 0.0, flags[i], flags[i]});
  const auto ep = episodes(s);
  REQUIRE(ep.size() == 2);
  CHECK(ep[0].t_start == 1.0);
  CHECK(ep[0].t_end == 3.0);
  CHECK(ep[1].t_start == 5.0);
  CHECK(ep[1].t_end == 6.0);

  CHECK(interval_iou({{0, 10}}, {{0, 10}}) == 1.0);
  CHECK(interval_iou({{0, 10}}, {{5, 15}}) == doctest::Approx(5.0 / 15.0));
  CHECK(interval_iou({{0, 1}}, {{2, 3}}) == 0.0);
  CHECK(interval_iou({}, {}) == 1.0);
  CHECK(interval_iou({{0, 4}, {2, 6}}, {{0, 6}}) == 1.0);  // overlaps merge
  CHECK(interval_iou({{0, 2}, {4, 6}}, {{1, 5}}) == doctest::Approx(2.0 / 6.0));
}

TEST_CASE("health csv round trip") {
  std::vector<HealthSample> s = {{0.2, 1500, 0.0012345678912, 0, 0},
                                 {0.4, 3, std::numeric_limits<double>::infinity(), 1, 1}};
  const auto path = std::filesystem::temp_directory_path() / "rfusion_test_health.csv";
  write_health_csv(path, s);
  const auto back = read_health_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].t == doctest::Approx(0.2));
  CHECK(back[0].n_feat == 1500);
  CHECK(back[0].eps_align == doctest::Approx(0.00123456789).epsilon(1e-9));
  CHECK(std::isinf(back[1].eps_align));
  CHECK(back[1].raw == 1);
  CHECK(back[1].debounced == 1);
}

TEST_CASE("simulated degradation window is detected within debounce latency") {
  sim::Scenario s = sim::named_scenario("corridor01-synth");
  s.duration = 40.0;
  s.schedule = {{sim::Subsystem::kLio, 15.0, 25.0, sim::DegradationMode::kAxisDrift, 0.15}};
  const auto scans = sim::synth_scans(s, sim::build_world(s));
  const DetectorConfig config;
  const auto health = detect(scans, config);
  REQUIRE(health.size() == scans.size() - 1);
  const auto ep = episodes(health);
  REQUIRE(ep.size() == 1);
  const double dt = 1.0 / s.scan_rate;
  CHECK(ep[0].t_start >= 15.0);
  CHECK(ep[0].t_start <= 15.0 + config.debounce_on * dt + 1e-9);
  CHECK(ep[0].t_end >= 25.0);
  CHECK(ep[0].t_end <= 25.0 + (config.debounce_off + 1) * dt + 1e-9);
  CHECK(interval_iou(ep, {{15.0, 25.0}}) >= 0.8);

  s.schedule.clear();
  const auto clean = detect(sim::synth_scans(s, sim::build_world(s)), config);
  CHECK(episodes(clean).empty());
}
