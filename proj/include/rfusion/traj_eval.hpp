#pragma once

// Trajectory metrics: ATE RMSE, RPE and final-position drift.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "rfusion/pose.hpp"

namespace rfusion {

enum class AlignmentMode { kNone, kRigid };

std::string to_string(AlignmentMode m);
// Throws std::invalid_argument for anything but "none" / "rigid".
AlignmentMode alignment_mode_from_string(const std::string& s);

struct MatchedPose {
  double t = 0.0;  // reference timestamp
  Transform est;
  Transform ref;
};

// Greedy nearest-timestamp matching. Throws MetricError with fewer than 2 matches.
std::vector<MatchedPose> associate(const Trajectory& est, const Trajectory& ref, double tolerance);

struct AteResult {
  double rmse = 0.0;
  AlignmentMode alignment_used = AlignmentMode::kNone;
  bool fallback = false;  // rigid requested but the positions were degenerate
  std::vector<double> errors;  // per matched pose, m
};

AteResult ate(const std::vector<MatchedPose>& matches, AlignmentMode alignment);
double ate_rmse(const Trajectory& est, const Trajectory& ref, AlignmentMode alignment, double tolerance = 0.02);

struct RpeResult {
  double trans = 0.0;  // RMS, m
  double rot = 0.0;    // RMS, deg
  std::size_t count = 0;
};

// Pairs (i, j) with t_j - t_i closest to delta (within the association
// tolerance). Throws MetricError when no pair exists or delta <= 0.
RpeResult rpe(const std::vector<MatchedPose>& matches, double delta, double tolerance = 0.02);

// Final position error after superimposing the first matched poses.
double drift_rate(const std::vector<MatchedPose>& matches);

struct EvalOptions {
  AlignmentMode alignment = AlignmentMode::kRigid;
  double tolerance = 0.02;
  double rpe_delta = 1.0;
};

struct MetricsReport {
  double ate_rmse = 0.0;
  double rpe_trans = 0.0;
  double rpe_rot = 0.0;
  double drift_rate = 0.0;
  std::size_t matched_pose_count = 0;
  AlignmentMode alignment_used = AlignmentMode::kNone;
  bool alignment_fallback = false;
  std::vector<std::pair<double, double>> errors;  // (t, err_m)
};

MetricsReport evaluate_trajectory(const Trajectory& est, const Trajectory& ref, const EvalOptions& options = {});

nlohmann::ordered_json metrics_json(const MetricsReport& r);
void write_errors_csv(const std::filesystem::path& path, const MetricsReport& r);

}  // namespace rfusion
