#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rfusion/rng.hpp"
#include "rfusion/scenario.hpp"

namespace rfusion::sim {

namespace {

constexpr std::uint64_t kLioStream = 1;
constexpr std::uint64_t kVioStream = 2;
constexpr std::uint64_t kScanStream = 3;

// Horizon over which the reported covariance accumulates random-walk error.
constexpr double kCovarianceHorizon = 5.0;  // s
constexpr double kMinTransSigma = 1e-3;     // m
constexpr double kMinRotSigma = 1e-4;       // rad

const DegradationWindow* active_window(const Scenario& s, Subsystem sub, double t) {
  for (const auto& w : s.schedule) {
    if (w.subsystem == sub && w.contains(t)) return &w;
  }
  return nullptr;
}

}  // namespace

ScanFrame synth_scan(const Transform& pose, const World& world, const SensorParams& sensor, double sigma,
                     std::uint64_t seed, double timestamp, const CabinState& cabin) {
  const Vec3& origin = pose.translation();
  if (!world.is_free(origin)) throw std::invalid_argument("scan pose lies outside free space");
  if (sensor.azimuth_steps <= 0 || sensor.channels <= 0) throw std::invalid_argument("sensor resolution must be positive");
  Rng rng(seed);
  ScanFrame scan;
  scan.timestamp = timestamp;
  scan.points.reserve(static_cast<std::size_t>(sensor.azimuth_steps) * sensor.channels);
  const double half_fov = 0.5 * sensor.vertical_fov_deg * std::numbers::pi / 180.0;
  for (int c = 0; c < sensor.channels; ++c) {
    const double elev =
        sensor.channels == 1 ? 0.0 : -half_fov + 2.0 * half_fov * c / static_cast<double>(sensor.channels - 1);
    for (int a = 0; a < sensor.azimuth_steps; ++a) {
      const double az = 2.0 * std::numbers::pi * a / sensor.azimuth_steps;
      const Vec3 d_local(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az), std::sin(elev));
      const auto range = world.cast(origin, pose.rotation() * d_local, sensor.max_range, cabin);
      if (!range) continue;
      Vec3 p = *range * d_local;
      if (sigma > 0.0) p += rng.normal3(sigma);
      scan.points.push_back(p);
    }
  }
  return scan;
}

double scan_sigma_at(const Scenario& s, double t) {
  return active_window(s, Subsystem::kLio, t) ? s.noise.degraded_scan_sigma : s.noise.scan_sigma;
}

ScanFrame synth_scenario_scan(const Scenario& s, const World& world, std::size_t index) {
  const double t = static_cast<double>(index) / s.scan_rate;
  return synth_scan(pose_at(s, t), world, s.sensor, scan_sigma_at(s, t), derive_seed(s.seed, kScanStream, index), t,
                    cabin_at(s, t));
}

std::vector<ScanFrame> synth_scans(const Scenario& s, const World& world) {
  const std::size_t n = s.scan_count();
  std::vector<ScanFrame> scans(n);
  // Each scan owns its seed, so the schedule cannot change the output.
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t i = 0; i < n; ++i) scans[i] = synth_scenario_scan(s, world, i);
  return scans;
}

std::vector<ScanFrame> synth_scans_serial(const Scenario& s, const World& world) {
  std::vector<ScanFrame> scans;
  scans.reserve(s.scan_count());
  for (std::size_t i = 0; i < s.scan_count(); ++i) scans.push_back(synth_scenario_scan(s, world, i));
  return scans;
}

Trajectory synth_odometry(const Trajectory& gt, Subsystem subsystem, const Scenario& s) {
  const bool lio = subsystem == Subsystem::kLio;
  const double walk = lio ? s.noise.lio_walk_sigma : s.noise.vio_walk_sigma;
  const double rot_walk = lio ? s.noise.lio_rot_walk_sigma : s.noise.vio_rot_walk_sigma;
  Rng rng(derive_seed(s.seed, lio ? kLioStream : kVioStream));
  const Transform frame = lio ? Transform() : s.vio_to_lio.inverse();

  Vec3 trans_err = Vec3::Zero();  // world frame
  Mat3 rot_err = Mat3::Identity();  // body frame
  Trajectory out;
  out.reserve(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double t = gt[i].t;
    if (i > 0) {
      // The error model of an interval is the one active at its start.
      const double t0 = gt[i - 1].t;
      const double dt = t - t0;
      const DegradationWindow* w = active_window(s, subsystem, t0);
      const double boost = w && w->mode == DegradationMode::kRandomWalkBoost ? w->magnitude : 1.0;
      const double drift = w && w->mode == DegradationMode::kAxisDrift ? w->magnitude : 0.0;
      // Noise is always drawn so dropouts do not shift later samples.
      const Vec3 dn = rng.normal3(boost * walk * std::sqrt(dt));
      const Vec3 dr = rng.normal3(boost * rot_walk * std::sqrt(dt));
      trans_err += dn + drift * dt * travel_direction(s, t0);
      rot_err = rot_err * exp_so3(dr);
    }
    const DegradationWindow* w = active_window(s, subsystem, t);
    if (w && w->mode == DegradationMode::kDropout) continue;
    if (!lio && t < s.vio_init_time) continue;
    const double boost = w && w->mode == DegradationMode::kRandomWalkBoost ? w->magnitude : 1.0;
    const double drift = w && w->mode == DegradationMode::kAxisDrift ? w->magnitude : 0.0;
    const double sigma = boost * walk, rot_sigma = boost * rot_walk;

    const Transform noisy(gt[i].pose.rotation() * rot_err, gt[i].pose.translation() + trans_err);
    const double ts = std::max(sigma * std::sqrt(kCovarianceHorizon), kMinTransSigma);
    const double rs = std::max(rot_sigma * std::sqrt(kCovarianceHorizon), kMinRotSigma);
    const double drift_var = std::pow(std::abs(drift) * kCovarianceHorizon, 2);
    Covariance6 cov = Covariance6::Zero();
    cov.diagonal() << Vec3::Constant(ts * ts + drift_var), Vec3::Constant(rs * rs);
    out.push_back({t, lio ? noisy : compose(frame, noisy), cov});
  }
  return out;
}

}  // namespace rfusion::sim
