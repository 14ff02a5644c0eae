// rfusion: simulate -> detect -> align -> fuse -> evaluate.
//
// Exit codes: 0 ok, 1 usage, 2 data, 3 numeric failure (--strict).

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rfusion/degeneracy.hpp"
#include "rfusion/errors.hpp"
#include "rfusion/frame_align.hpp"
#include "rfusion/io.hpp"
#include "rfusion/run_config.hpp"
#include "rfusion/scenario.hpp"
#include "rfusion/supervisor.hpp"
#include "rfusion/traj_eval.hpp"

namespace fs = std::filesystem;
using namespace rfusion;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct NumericFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool verbose = false;
};

void setup_logging(bool verbose) {
  auto logger = spdlog::stderr_color_mt("rfusion");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("RESILIENT_FUSION_LOG")) spdlog::set_level(spdlog::level::from_str(env));
  if (verbose) spdlog::set_level(spdlog::level::debug);
}

RunConfig load_config(const Globals& g) {
  RunConfig c;
  if (!g.config.empty()) {
    // A config that cannot be read is a data error; one with bad keys is usage.
    c = run_config_from_json(io::read_json(g.config));
  }
  if (g.seed) c.seed = *g.seed;
  return c;
}

fs::path require_out(const Globals& g) {
  if (g.out.empty()) throw CLI::ValidationError("--out", "an output directory is required");
  fs::create_directories(g.out);
  return g.out;
}

std::string fmt_row(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
  return s;
}

int cmd_simulate(const Globals& g, const std::string& scenario_name) {
  RunConfig c = load_config(g);
  sim::Scenario s;
  if (!scenario_name.empty()) {
    s = sim::named_scenario(scenario_name);
  } else if (c.scenario) {
    s = *c.scenario;
  } else {
    s = sim::named_scenario("corridor01-synth");
  }
  // An explicit --seed overrides the scenario's own; a config seed applies
  // only when the scenario came from the name.
  if (g.seed) s.seed = *g.seed;
  else if (!c.scenario || !scenario_name.empty()) s.seed = c.seed;
  const fs::path out = require_out(g);
  spdlog::info("simulating {} (seed {}) into {}", s.name, s.seed, out.string());
  sim::write_scenario(s, out);
  std::cout << "simulated " << s.name << ": " << s.pose_count() << " poses, " << s.scan_count() << " scans -> "
            << out.string() << "\n";
  return kExitOk;
}

int cmd_detect(const Globals& g, const std::string& scenario_dir) {
  const RunConfig c = load_config(g);
  const fs::path out = require_out(g);
  const fs::path scans_dir = fs::path(scenario_dir) / "scans";
  const auto files = io::list_scans(scans_dir);
  if (files.empty()) throw DataError(scans_dir.string(), "no scan files");
  std::vector<ScanFrame> scans;
  scans.reserve(files.size());
  for (const auto& f : files) scans.push_back(io::read_scan(f));
  const auto health = detect(scans, c.detector);
  write_health_csv(out / "health.csv", health);

  nlohmann::ordered_json j;
  const auto eps = episodes(health);
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& e : eps) arr.push_back({{"t_start", io::round9(e.t_start)}, {"t_end", io::round9(e.t_end)}});
  j["samples"] = health.size();
  j["episodes"] = arr;
  const fs::path schedule = fs::path(scenario_dir) / "schedule.json";
  if (fs::exists(schedule)) {
    std::vector<Interval> injected;
    for (const auto& w : sim::schedule_from_json(io::read_json(schedule))) {
      if (w.subsystem == sim::Subsystem::kLio) injected.push_back({w.t_start, w.t_end});
    }
    j["schedule_iou"] = io::round9(interval_iou(eps, injected));
  }
  j["config"] = to_json(c)["detector"];
  io::write_json(out / "detect.json", j);
  std::cout << "detect: " << eps.size() << " episodes over " << health.size() << " samples\n";
  return kExitOk;
}

int cmd_align(const Globals& g, const std::string& scenario_dir, double t0, double t1, bool strict) {
  const RunConfig c = load_config(g);
  const fs::path out = require_out(g);
  const auto data = sim::read_scenario(scenario_dir);
  std::vector<PosePair> window;
  for (const auto& p : pair_poses(data.lio, data.vio, c.supervisor.pair_tolerance)) {
    if (p.t >= t0 && p.t <= t1) window.push_back(p);
  }
  const AlignmentResult r = solve_alignment(window, c.supervisor.align);
  auto j = alignment_json(r);
  j["pairs"] = window.size();
  const Transform& truth = data.scenario.vio_to_lio;
  j["truth_error"] = {{"translation", io::round9((r.t_align.translation() - truth.translation()).norm())},
                      {"rotation_deg", io::round9(rotation_angle(r.t_align.rotation().transpose() * truth.rotation()) *
                                                  180.0 / std::numbers::pi)}};
  io::write_json(out / "align.json", j);
  std::cout << "align: " << window.size() << " pairs, cost " << io::fmt9(r.final_cost) << ", "
            << (r.converged ? "converged" : "NOT converged") << "\n";
  if (strict && !r.converged) throw NumericFailure("alignment did not converge");
  return kExitOk;
}

int cmd_fuse(const Globals& g, const std::string& scenario_dir, const std::string& health_source,
             const std::string& gt_path, bool strict) {
  RunConfig c = load_config(g);
  if (!health_source.empty()) c.health_source = health_source_from_string(health_source);
  const fs::path out = require_out(g);
  OfflineConfig oc;
  oc.supervisor = c.supervisor;
  oc.detector = c.detector;
  oc.health_source = c.health_source;
  const OfflineResult res = run_offline(scenario_dir, oc);
  auto echo = to_json(c);
  echo.erase("scenario");
  write_fusion_outputs(out, res, echo);
  for (const auto& l : res.fusion.log) spdlog::debug("t={} {}", io::fmt_time(l.t), l.message);

  std::string summary = "fuse: " + std::to_string(res.fusion.vio_episode_count()) + " VIO episodes, " +
                        std::to_string(res.fusion.poses.size()) + " poses";
  if (!gt_path.empty()) {
    const Trajectory gt = io::read_tum(gt_path);
    const auto m = evaluate_trajectory(res.fusion.trajectory(), gt, c.evaluation);
    summary += ", ate_rmse " + io::fmt9(m.ate_rmse) + " m";
  }
  std::cout << summary << "\n";
  if (strict && res.fusion.alignment_failures > 0) {
    throw NumericFailure(std::to_string(res.fusion.alignment_failures) + " alignment solves did not converge");
  }
  return kExitOk;
}

int cmd_evaluate(const Globals& g, const std::string& est, const std::string& gt, const std::vector<std::string>& compare,
                 const std::string& alignment) {
  RunConfig c = load_config(g);
  if (!alignment.empty()) c.evaluation.alignment = alignment_mode_from_string(alignment);
  if (gt.empty()) throw CLI::ValidationError("--gt", "a reference trajectory is required");
  const Trajectory ref = io::read_tum(gt);
  if (!compare.empty()) {
    std::string csv = "file,ate_rmse,rpe_trans,rpe_rot,drift_rate,matched_pose_count,alignment_used\n";
    for (const auto& f : compare) {
      const auto m = evaluate_trajectory(io::read_tum(f), ref, c.evaluation);
      csv += fmt_row({f, io::fmt9(m.ate_rmse), io::fmt9(m.rpe_trans), io::fmt9(m.rpe_rot), io::fmt9(m.drift_rate),
                      std::to_string(m.matched_pose_count), to_string(m.alignment_used)}) +
             "\n";
    }
    std::cout << csv;
    if (!g.out.empty()) io::write_text(require_out(g) / "compare.csv", csv);
    return kExitOk;
  }
  if (est.empty()) throw CLI::ValidationError("--est", "an estimate (or --compare) is required");
  const auto m = evaluate_trajectory(io::read_tum(est), ref, c.evaluation);
  if (m.alignment_fallback) spdlog::warn("rigid alignment degenerate; reported unaligned ATE");
  if (!g.out.empty()) {
    const fs::path out = require_out(g);
    io::write_json(out / "metrics.json", metrics_json(m));
    write_errors_csv(out / "errors.csv", m);
  }
  std::cout << "ate_rmse " << io::fmt9(m.ate_rmse) << " m, rpe " << io::fmt9(m.rpe_trans) << " m / "
            << io::fmt9(m.rpe_rot) << " deg, drift " << io::fmt9(m.drift_rate) << " m, " << m.matched_pose_count
            << " poses\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resilient LIO/VIO fusion toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_option("--seed", g.seed, "Random seed (u64)");
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--verbose", g.verbose, "Debug logging");
  app.fallthrough();

  std::string scenario_name, scenario_dir, health_source, gt, est, alignment;
  double t0 = -1e300, t1 = 1e300;
  bool strict = false;
  std::vector<std::string> compare;

  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic scenario directory");
  sim_cmd->add_option("--scenario", scenario_name, "Scenario name");

  auto* det_cmd = app.add_subcommand("detect", "Run the degradation detector over a scenario's scans");
  det_cmd->add_option("--scenario-dir", scenario_dir, "Scenario directory")->required();

  auto* align_cmd = app.add_subcommand("align", "Solve the VIO->LIO frame alignment");
  align_cmd->add_option("--scenario-dir", scenario_dir, "Scenario directory")->required();
  align_cmd->add_option("--t-start", t0, "First pair time (s)");
  align_cmd->add_option("--t-end", t1, "Last pair time (s)");
  align_cmd->add_flag("--strict", strict, "Exit 3 when the solver does not converge");

  auto* fuse_cmd = app.add_subcommand("fuse", "Run the fusion supervisor");
  fuse_cmd->add_option("--scenario-dir", scenario_dir, "Scenario directory")->required();
  fuse_cmd->add_option("--health-source", health_source, "detector | schedule_oracle");
  fuse_cmd->add_option("--gt", gt, "Ground truth TUM file for the summary ATE");
  fuse_cmd->add_flag("--strict", strict, "Exit 3 when an alignment solve does not converge");

  auto* eval_cmd = app.add_subcommand("evaluate", "Trajectory metrics against ground truth");
  eval_cmd->add_option("--est", est, "Estimated trajectory (TUM)");
  eval_cmd->add_option("--gt", gt, "Reference trajectory (TUM)");
  eval_cmd->add_option("--compare", compare, "Several estimates; prints a CSV table");
  eval_cmd->add_option("--alignment", alignment, "none | rigid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  setup_logging(g.verbose);

  try {
    if (sim_cmd->parsed()) return cmd_simulate(g, scenario_name);
    if (det_cmd->parsed()) return cmd_detect(g, scenario_dir);
    if (align_cmd->parsed()) return cmd_align(g, scenario_dir, t0, t1, strict);
    if (fuse_cmd->parsed()) return cmd_fuse(g, scenario_dir, health_source, gt, strict);
    if (eval_cmd->parsed()) return cmd_evaluate(g, est, gt, compare, alignment);
  } catch (const CLI::ValidationError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const NumericFailure& e) {
    spdlog::error("{}", e.what());
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    // DataError, MetricError, StreamError, InvalidCovariance, I/O.
    spdlog::error("{}", e.what());
    return kExitData;
  }
  return kExitUsage;
}
