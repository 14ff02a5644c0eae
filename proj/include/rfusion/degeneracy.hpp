#pragma once

// LiDAR degradation flag: raw per-scan condition plus debounce.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "rfusion/scan_match.hpp"

namespace rfusion {

struct DetectorConfig {
  double tau_n = 100.0;     // feature count threshold
  double tau_eps = 0.09;    // residual threshold, m^2
  int debounce_on = 3;      // consecutive raw 1s to assert
  int debounce_off = 5;     // consecutive raw 0s to clear
  bool use_hessian = false;  // extra OR-term on hessian_min_eig
  double tau_hessian = 1.0;

  // Throws std::invalid_argument.
  void validate() const;
};

struct HealthSample {
  double t = 0.0;
  std::size_t n_feat = 0;
  double eps_align = 0.0;
  int raw = 0;
  int debounced = 0;
};

// 1 iff n_feat < tau_n or eps_align > tau_eps (non-finite eps counts as degraded).
int evaluate(const MatchReport& report, const DetectorConfig& config);

class DegeneracyDetector {
 public:
  explicit DegeneracyDetector(DetectorConfig config = {});

  // Throws StreamError unless t is strictly after the previous sample.
  HealthSample step(double t, const MatchReport& report);
  // Same, for a raw flag computed elsewhere (e.g. a schedule oracle).
  HealthSample step_raw(double t, int raw, std::size_t n_feat = 0, double eps_align = 0.0);
  int state() const { return state_; }
  const DetectorConfig& config() const { return config_; }

 private:
  DetectorConfig config_;
  int state_ = 0;
  int run_ = 0;  // consecutive raw samples disagreeing with state_
  std::optional<double> last_t_;
};

// Frame-to-frame ICP over consecutive scans (constant-velocity prior) fed
// through a detector. The first scan has no predecessor and yields no sample.
std::vector<MatchReport> match_scan_sequence(const std::vector<ScanFrame>& scans, const IcpParams& params = {});
std::vector<HealthSample> detect(const std::vector<ScanFrame>& scans, const DetectorConfig& config = {},
                                 const IcpParams& params = {});
std::vector<HealthSample> detect_reports(const std::vector<double>& stamps, const std::vector<MatchReport>& reports,
                                         const DetectorConfig& config = {});

struct Interval {
  double t_start = 0.0;
  double t_end = 0.0;
  double length() const { return t_end - t_start; }
};

// Maximal runs of debounced = 1, from the asserting sample to the clearing one
// (or the last sample).
std::vector<Interval> episodes(const std::vector<HealthSample>& samples);
// |union of a ∩ union of b| / |union of a ∪ union of b|; 1 when both are empty.
double interval_iou(const std::vector<Interval>& a, const std::vector<Interval>& b);

// Header `t,n_feat,eps_align,raw,debounced`.
void write_health_csv(const std::filesystem::path& path, const std::vector<HealthSample>& samples);
std::vector<HealthSample> read_health_csv(const std::filesystem::path& path);

}  // namespace rfusion
