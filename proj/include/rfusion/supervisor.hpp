#pragma once

// LiDAR-priority fusion: emit LIO poses, fall back to frame-aligned VIO while
// the LiDAR is flagged degraded, and blend across each switch.

#include <deque>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "rfusion/degeneracy.hpp"
#include "rfusion/frame_align.hpp"
#include "rfusion/pose.hpp"
#include "rfusion/scenario.hpp"

namespace rfusion {

enum class Source { kLio, kVio };
enum class SmoothingConvention { kInterpolating, kPaperLiteral };
enum class BetaSchedule { kLinear, kSmoothstep };
enum class HealthSource { kDetector, kScheduleOracle };

std::string to_string(Source s);
std::string to_string(SmoothingConvention c);
std::string to_string(BetaSchedule b);
std::string to_string(HealthSource h);
SmoothingConvention smoothing_convention_from_string(const std::string& s);
BetaSchedule beta_schedule_from_string(const std::string& s);
HealthSource health_source_from_string(const std::string& s);

struct SmootherConfig {
  double duration = 2.0;  // s
  BetaSchedule schedule = BetaSchedule::kLinear;
  SmoothingConvention convention = SmoothingConvention::kInterpolating;

  double beta(double elapsed) const;
  void validate() const;
};

// interpolating: geodesic from t_active to t_align * t_backup.
// paper_literal: t_active * exp(-beta log(t_active^-1 t_align t_backup)).
// Throws std::invalid_argument when beta is outside [0, 1].
Transform apply_smoothing(const Transform& t_active, const Transform& t_backup, const Transform& t_align,
                          double beta, SmoothingConvention convention);

struct SupervisorConfig {
  AlignOptions align;
  std::size_t window_k = 50;
  double pair_tolerance = 0.05;  // s
  double clock_skew = 1e-6;      // s, events this close count as simultaneous
  SmootherConfig smoother;
  bool continuous_alignment = false;

  void validate() const;
};

struct LioPose {
  StampedPose pose;
};
struct VioPose {
  StampedPose pose;
};
struct HealthEvent {
  HealthSample sample;
};
struct VioInit {
  double t = 0.0;
  bool initialized = true;
};
using FusionEvent = std::variant<LioPose, VioPose, HealthEvent, VioInit>;

double event_time(const FusionEvent& e);

struct FusedPose {
  double t = 0.0;
  Transform pose;
  Source source = Source::kLio;  // the source being switched to during a blend
  bool blending = false;
  bool degraded = false;  // LiDAR flagged but no usable VIO fallback
};

struct Transition {
  Source from = Source::kLio;
  Source to = Source::kVio;
  double t_start = 0.0;
  double t_end = 0.0;  // when the blend finished (or was cut short)
};

// A maximal span with one active source. For spans after a switch, the
// alignment that mapped the new source into the output frame.
struct SourceEpisode {
  Source source = Source::kLio;
  double t_start = 0.0;
  double t_end = 0.0;
  std::optional<AlignmentResult> alignment;
};

struct LogEntry {
  double t = 0.0;
  std::string message;
};

class FusionSupervisor {
 public:
  explicit FusionSupervisor(SupervisorConfig config = {});

  // Events sharing a timestamp are gathered; the fused pose for a timestamp
  // is returned once a later event (or flush) closes it. Throws StreamError
  // for events earlier than the open timestamp by more than clock_skew.
  std::optional<FusedPose> step(const FusionEvent& event);
  std::optional<FusedPose> flush();

  Source active() const { return active_; }
  bool in_transition() const { return transition_.has_value(); }
  const Transform& vio_alignment() const { return align_vio_; }
  const Transform& lio_correction() const { return align_lio_; }
  const std::vector<Transition>& transitions() const { return transitions_; }
  // Episodes so far; the last one is still open (t_end = last output time).
  std::vector<SourceEpisode> episodes() const;
  const std::vector<LogEntry>& log() const { return log_; }
  // Solves that ran but did not converge.
  std::size_t alignment_failures() const { return alignment_failures_; }

 private:
  struct PairRecord {
    double t;
    StampedPose lio;
    StampedPose vio;
    bool clean;
  };
  struct Blend {
    Source from;
    double t_start;
  };

  std::optional<FusedPose> close_stamp();
  void update_source(double t);
  bool try_switch(double t, Source to);
  std::vector<PosePair> clean_window(Source to) const;
  Transform mapped(Source s, const Transform& raw) const;

  SupervisorConfig config_;
  Source active_ = Source::kLio;
  std::optional<Blend> transition_;
  Transform align_vio_;  // VIO frame -> output frame
  Transform align_lio_;  // LIO frame -> output frame
  bool lio_corrected_ = false;
  bool vio_initialized_ = false;
  bool switch_pending_ = false;  // a switch failed and is retried each timestamp
  bool uninitialized_logged_ = false;
  int raw_ = 0;
  int debounced_ = 0;
  std::size_t alignment_failures_ = 0;

  std::optional<double> open_t_;
  std::optional<StampedPose> open_lio_;
  std::optional<StampedPose> open_vio_;
  std::optional<StampedPose> last_lio_;
  std::optional<StampedPose> last_vio_;

  std::deque<PairRecord> history_;
  std::vector<Transition> transitions_;
  std::vector<SourceEpisode> episodes_;
  std::vector<LogEntry> log_;
};

// Merges the streams into one time-ordered event list. At equal timestamps
// VioInit and health come before poses.
std::vector<FusionEvent> merge_events(const Trajectory& lio, const Trajectory& vio,
                                      const std::vector<HealthSample>& health, std::optional<double> vio_init_time);

struct FusionResult {
  std::vector<FusedPose> poses;
  std::vector<Transition> transitions;
  std::vector<SourceEpisode> episodes;
  std::vector<LogEntry> log;
  std::size_t alignment_failures = 0;

  Trajectory trajectory() const;
  std::size_t vio_episode_count() const;
  std::vector<Interval> vio_intervals() const;
};

FusionResult run_fusion(const std::vector<FusionEvent>& events, const SupervisorConfig& config);

// Health samples at the given stamps: raw = inside a LIO window, then debounced.
std::vector<HealthSample> schedule_health(const std::vector<double>& stamps,
                                          const std::vector<sim::DegradationWindow>& schedule,
                                          const DetectorConfig& config);

struct OfflineConfig {
  SupervisorConfig supervisor;
  DetectorConfig detector;
  IcpParams icp;
  HealthSource health_source = HealthSource::kDetector;
};

struct OfflineResult {
  FusionResult fusion;
  std::vector<HealthSample> health;
  sim::ScenarioData data;
};

// Reads a scenario directory, derives health (detector over the scans, or the
// schedule oracle), runs the supervisor. Throws DataError for missing files.
OfflineResult run_offline(const std::filesystem::path& scenario_dir, const OfflineConfig& config);
// fused.tum, report.json and health.csv into out_dir.
void write_fusion_outputs(const std::filesystem::path& out_dir, const OfflineResult& result,
                          const nlohmann::ordered_json& config_echo);
nlohmann::ordered_json fusion_report(const OfflineResult& result, const nlohmann::ordered_json& config_echo);

}  // namespace rfusion
