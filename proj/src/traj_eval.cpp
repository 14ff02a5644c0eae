#include "rfusion/traj_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rfusion/associate.hpp"
#include "rfusion/errors.hpp"
#include "rfusion/io.hpp"

namespace rfusion {

std::string to_string(AlignmentMode m) { return m == AlignmentMode::kRigid ? "rigid" : "none"; }

AlignmentMode alignment_mode_from_string(const std::string& s) {
  if (s == "rigid") return AlignmentMode::kRigid;
  if (s == "none") return AlignmentMode::kNone;
  throw std::invalid_argument("alignment must be 'none' or 'rigid', got '" + s + "'");
}

std::vector<MatchedPose> associate(const Trajectory& est, const Trajectory& ref, double tolerance) {
  std::vector<double> te, tr;
  for (const auto& p : est) te.push_back(p.t);
  for (const auto& p : ref) tr.push_back(p.t);
  std::vector<MatchedPose> out;
  for (const auto& [i, j] : associate_stamps(te, tr, tolerance)) out.push_back({ref[j].t, est[i].pose, ref[j].pose});
  if (out.size() < 2) {
    throw MetricError("only " + std::to_string(out.size()) + " poses match within " + io::fmt9(tolerance) + " s");
  }
  return out;
}

namespace {

std::vector<double> position_errors(const std::vector<MatchedPose>& matches, const Transform& align) {
  std::vector<double> out;
  out.reserve(matches.size());
  for (const auto& m : matches) out.push_back((align * m.est.translation() - m.ref.translation()).norm());
  return out;
}

double rms(const std::vector<double>& v) {
  double sum = 0.0;
  for (double e : v) sum += e * e;
  return v.empty() ? 0.0 : std::sqrt(sum / static_cast<double>(v.size()));
}

}  // namespace

AteResult ate(const std::vector<MatchedPose>& matches, AlignmentMode alignment) {
  AteResult res;
  res.errors = position_errors(matches, Transform());
  res.rmse = rms(res.errors);
  if (alignment != AlignmentMode::kRigid) return res;
  std::vector<Vec3> e, r;
  for (const auto& m : matches) {
    e.push_back(m.est.translation());
    r.push_back(m.ref.translation());
  }
  Transform align;
  try {
    align = umeyama_align(e, r);
  } catch (const DegenerateGeometry&) {
    res.fallback = true;
    return res;
  }
  res.alignment_used = AlignmentMode::kRigid;
  // Identity is also a rigid candidate; keeping it avoids rounding noise
  // when the trajectories already coincide.
  auto aligned = position_errors(matches, align);
  const double aligned_rmse = rms(aligned);
  if (aligned_rmse < res.rmse) {
    res.errors = std::move(aligned);
    res.rmse = aligned_rmse;
  }
  return res;
}

double ate_rmse(const Trajectory& est, const Trajectory& ref, AlignmentMode alignment, double tolerance) {
  return ate(associate(est, ref, tolerance), alignment).rmse;
}

RpeResult rpe(const std::vector<MatchedPose>& matches, double delta, double tolerance) {
  if (!(delta > 0.0)) throw MetricError("rpe delta must be > 0");
  std::vector<double> stamps;
  for (const auto& m : matches) stamps.push_back(m.t);
  RpeResult res;
  double sum_t = 0.0, sum_r = 0.0;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const double target = stamps[i] + delta;
    const auto it = std::lower_bound(stamps.begin() + static_cast<std::ptrdiff_t>(i) + 1, stamps.end(), target);
    std::size_t best = matches.size();
    double best_gap = tolerance;
    for (auto cand : {it, it - 1}) {
      if (cand <= stamps.begin() + static_cast<std::ptrdiff_t>(i) || cand >= stamps.end()) continue;
      const double gap = std::abs(*cand - target);
      if (gap <= best_gap) {
        best_gap = gap;
        best = static_cast<std::size_t>(cand - stamps.begin());
      }
    }
    if (best == matches.size()) continue;
    const Transform dr = matches[i].ref.inverse() * matches[best].ref;
    const Transform de = matches[i].est.inverse() * matches[best].est;
    const Transform e = dr.inverse() * de;
    sum_t += e.translation().squaredNorm();
    const double ang = rotation_angle(e.rotation()) * 180.0 / std::numbers::pi;
    sum_r += ang * ang;
    ++res.count;
  }
  if (res.count == 0) throw MetricError("no pose pairs " + io::fmt9(delta) + " s apart");
  res.trans = std::sqrt(sum_t / static_cast<double>(res.count));
  res.rot = std::sqrt(sum_r / static_cast<double>(res.count));
  return res;
}

double drift_rate(const std::vector<MatchedPose>& matches) {
  if (matches.size() < 2) throw MetricError("drift needs at least 2 matched poses");
  const Transform origin = matches.front().ref * matches.front().est.inverse();
  return ((origin * matches.back().est).translation() - matches.back().ref.translation()).norm();
}

MetricsReport evaluate_trajectory(const Trajectory& est, const Trajectory& ref, const EvalOptions& options) {
  const auto matches = associate(est, ref, options.tolerance);
  MetricsReport r;
  const AteResult a = ate(matches, options.alignment);
  r.ate_rmse = a.rmse;
  r.alignment_used = a.alignment_used;
  r.alignment_fallback = a.fallback;
  const RpeResult p = rpe(matches, options.rpe_delta, options.tolerance);
  r.rpe_trans = p.trans;
  r.rpe_rot = p.rot;
  r.drift_rate = drift_rate(matches);
  r.matched_pose_count = matches.size();
  for (std::size_t i = 0; i < matches.size(); ++i) r.errors.emplace_back(matches[i].t, a.errors[i]);
  return r;
}

nlohmann::ordered_json metrics_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["ate_rmse"] = io::round9(r.ate_rmse);
  j["rpe_trans"] = io::round9(r.rpe_trans);
  j["rpe_rot"] = io::round9(r.rpe_rot);
  j["drift_rate"] = io::round9(r.drift_rate);
  j["matched_pose_count"] = r.matched_pose_count;
  j["alignment_used"] = to_string(r.alignment_used);
  j["alignment_fallback"] = r.alignment_fallback;
  return j;
}

void write_errors_csv(const std::filesystem::path& path, const MetricsReport& r) {
  std::string out = "t,err_m\n";
  for (const auto& [t, e] : r.errors) out += io::fmt_time(t) + ',' + io::fmt9(e) + '\n';
  io::write_text(path, out);
}

}  // namespace rfusion
