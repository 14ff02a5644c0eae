#include "rfusion/supervisor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rfusion/errors.hpp"
#include "rfusion/io.hpp"

namespace rfusion {

namespace {

Covariance6 pair_sigma(const StampedPose& a, const StampedPose& b) {
  if (!a.covariance && !b.covariance) return default_pair_covariance();
  return a.covariance.value_or(Covariance6::Zero()) + b.covariance.value_or(Covariance6::Zero());
}

int event_rank(const FusionEvent& e) {
  // At equal timestamps: initialization and health first, then poses.
  return std::visit(
      [](const auto& ev) -> int {
        using T = std::decay_t<decltype(ev)>;
        if constexpr (std::is_same_v<T, VioInit>) return 0;
        else if constexpr (std::is_same_v<T, HealthEvent>) return 1;
        else if constexpr (std::is_same_v<T, LioPose>) return 2;
        else return 3;
      },
      e);
}

}  // namespace

std::string to_string(Source s) { return s == Source::kLio ? "lio" : "vio"; }
std::string to_string(SmoothingConvention c) {
  return c == SmoothingConvention::kInterpolating ? "interpolating" : "paper_literal";
}
std::string to_string(BetaSchedule b) { return b == BetaSchedule::kLinear ? "linear" : "smoothstep"; }
std::string to_string(HealthSource h) { return h == HealthSource::kDetector ? "detector" : "schedule_oracle"; }

SmoothingConvention smoothing_convention_from_string(const std::string& s) {
  if (s == "interpolating") return SmoothingConvention::kInterpolating;
  if (s == "paper_literal") return SmoothingConvention::kPaperLiteral;
  throw std::invalid_argument("smoothing convention must be 'interpolating' or 'paper_literal', got '" + s + "'");
}

BetaSchedule beta_schedule_from_string(const std::string& s) {
  if (s == "linear") return BetaSchedule::kLinear;
  if (s == "smoothstep") return BetaSchedule::kSmoothstep;
  throw std::invalid_argument("beta schedule must be 'linear' or 'smoothstep', got '" + s + "'");
}

HealthSource health_source_from_string(const std::string& s) {
  if (s == "detector") return HealthSource::kDetector;
  if (s == "schedule_oracle") return HealthSource::kScheduleOracle;
  throw std::invalid_argument("health source must be 'detector' or 'schedule_oracle', got '" + s + "'");
}

double SmootherConfig::beta(double elapsed) const {
  if (!(duration > 0.0)) return 1.0;
  const double u = std::clamp(elapsed / duration, 0.0, 1.0);
  return schedule == BetaSchedule::kLinear ? u : u * u * (3.0 - 2.0 * u);
}

void SmootherConfig::validate() const {
  if (!(duration >= 0.0)) throw std::invalid_argument("smoothing duration must be >= 0");
}

void SupervisorConfig::validate() const {
  smoother.validate();
  if (window_k < align.k_min) throw std::invalid_argument("window_k must be >= k_min");
  if (!(align.cauchy_c > 0.0)) throw std::invalid_argument("cauchy scale must be > 0");
  if (!(pair_tolerance >= 0.0)) throw std::invalid_argument("pair tolerance must be >= 0");
  if (!(clock_skew >= 0.0)) throw std::invalid_argument("clock skew must be >= 0");
}

Transform apply_smoothing(const Transform& t_active, const Transform& t_backup, const Transform& t_align,
                          double beta, SmoothingConvention convention) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
  if (beta == 0.0) return t_active;
  const Transform target = t_align * t_backup;
  if (convention == SmoothingConvention::kInterpolating) return geodesic_interp(t_active, target, beta);
  const Twist d = log_se3(t_active.inverse() * target);
  return t_active * exp_se3({-beta * d.rho, -beta * d.phi});
}

double event_time(const FusionEvent& e) {
  return std::visit(
      [](const auto& ev) -> double {
        using T = std::decay_t<decltype(ev)>;
        if constexpr (std::is_same_v<T, HealthEvent>) return ev.sample.t;
        else if constexpr (std::is_same_v<T, VioInit>) return ev.t;
        else return ev.pose.t;
      },
      e);
}

FusionSupervisor::FusionSupervisor(SupervisorConfig config) : config_(config) { config_.validate(); }

std::optional<FusedPose> FusionSupervisor::step(const FusionEvent& event) {
  const double t = event_time(event);
  if (!std::isfinite(t)) throw StreamError("event with non-finite timestamp");
  std::optional<FusedPose> out;
  if (open_t_) {
    if (t < *open_t_ - config_.clock_skew) {
      throw StreamError("event at t=" + io::fmt_time(t) + " arrived after t=" + io::fmt_time(*open_t_));
    }
    if (t > *open_t_ + config_.clock_skew) out = close_stamp();
  }
  if (!open_t_) open_t_ = t;

  std::visit(
      [&](const auto& ev) {
        using T = std::decay_t<decltype(ev)>;
        if constexpr (std::is_same_v<T, LioPose>) {
          if (open_lio_) throw StreamError("two LIO poses at t=" + io::fmt_time(t));
          open_lio_ = ev.pose;
        } else if constexpr (std::is_same_v<T, VioPose>) {
          if (open_vio_) throw StreamError("two VIO poses at t=" + io::fmt_time(t));
          open_vio_ = ev.pose;
        } else if constexpr (std::is_same_v<T, HealthEvent>) {
          raw_ = ev.sample.raw;
          debounced_ = ev.sample.debounced;
        } else {
          vio_initialized_ = ev.initialized;
        }
      },
      event);
  return out;
}

std::optional<FusedPose> FusionSupervisor::flush() {
  if (!open_t_) return std::nullopt;
  return close_stamp();
}

Transform FusionSupervisor::mapped(Source s, const Transform& raw) const {
  if (s == Source::kVio) return align_vio_ * raw;
  return lio_corrected_ ? align_lio_ * raw : raw;
}

std::vector<PosePair> FusionSupervisor::clean_window(Source to) const {
  std::vector<PosePair> out;
  // Skip the degraded tail (the pairs that triggered a switch to VIO), then
  // take the newest run of clean pairs.
  auto it = history_.rbegin();
  while (it != history_.rend() && !it->clean) ++it;
  for (; it != history_.rend() && it->clean && out.size() < config_.window_k; ++it) {
    PosePair p;
    p.t = it->t;
    if (to == Source::kVio) {
      p.lio = mapped(Source::kLio, it->lio.pose);
      p.vio = it->vio.pose;
    } else {
      p.lio = mapped(Source::kVio, it->vio.pose);
      p.vio = it->lio.pose;
    }
    p.sigma = pair_sigma(it->lio, it->vio);
    out.push_back(p);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

bool FusionSupervisor::try_switch(double t, Source to) {
  const auto window = clean_window(to);
  if (window.size() < config_.align.k_min) {
    if (!switch_pending_) {
      log_.push_back({t, "switch to " + to_string(to) + " deferred: " + std::to_string(window.size()) +
                             " clean pose pairs, need " + std::to_string(config_.align.k_min)});
    }
    switch_pending_ = true;
    return false;
  }
  const AlignmentResult r = solve_alignment(window, config_.align);
  if (!r.converged) {
    ++alignment_failures_;
    if (!switch_pending_) {
      log_.push_back({t, "alignment for switch to " + to_string(to) + " did not converge (" +
                             std::to_string(window.size()) + " pairs, cost " + std::to_string(r.final_cost) +
                             "); staying on " + to_string(active_)});
    }
    switch_pending_ = true;
    return false;
  }
  switch_pending_ = false;
  if (to == Source::kVio) {
    align_vio_ = r.t_align;
  } else {
    align_lio_ = r.t_align;
    lio_corrected_ = true;
  }
  if (transition_ && !transitions_.empty()) transitions_.back().t_end = t;
  transitions_.push_back({active_, to, t, t});
  transition_ = Blend{active_, t};
  if (!episodes_.empty()) episodes_.back().t_end = t;
  episodes_.push_back({to, t, t, r});
  log_.push_back({t, "switch " + to_string(active_) + " -> " + to_string(to) + " (" + std::to_string(window.size()) +
                         " pairs, " + std::to_string(r.iterations) + " iterations)"});
  active_ = to;
  return true;
}

void FusionSupervisor::update_source(double t) {
  if (debounced_ && active_ == Source::kLio) {
    if (!vio_initialized_) {
      if (!uninitialized_logged_) log_.push_back({t, "LiDAR degraded but VIO not initialized; staying on LIO"});
      uninitialized_logged_ = true;
      return;
    }
    try_switch(t, Source::kVio);
  } else if (!debounced_ && active_ == Source::kVio) {
    try_switch(t, Source::kLio);
  } else {
    switch_pending_ = false;
    uninitialized_logged_ = false;
  }
  if (config_.continuous_alignment && active_ == Source::kLio && !transition_ && raw_ == 0 && vio_initialized_) {
    const auto window = clean_window(Source::kVio);
    if (window.size() >= config_.align.k_min) {
      const AlignmentResult r = solve_alignment(window, config_.align);
      if (r.converged) {
        align_vio_ = r.t_align;
      } else {
        ++alignment_failures_;
      }
    }
  }
}

std::optional<FusedPose> FusionSupervisor::close_stamp() {
  const double t = *open_t_;
  const std::optional<StampedPose> lio = open_lio_;
  const std::optional<StampedPose> vio = vio_initialized_ ? open_vio_ : std::nullopt;
  open_t_.reset();
  open_lio_.reset();
  open_vio_.reset();
  if (lio) last_lio_ = lio;
  if (vio) last_vio_ = vio;

  // Pair each new pose with the latest pose of the other stream, if close enough.
  const auto near = [&](const std::optional<StampedPose>& p) {
    return p && std::abs(p->t - t) <= config_.pair_tolerance;
  };
  if ((lio || vio) && near(last_lio_) && near(last_vio_) &&
      (history_.empty() || (history_.back().lio.t != last_lio_->t && history_.back().vio.t != last_vio_->t))) {
    history_.push_back({t, *last_lio_, *last_vio_, raw_ == 0});
    while (history_.size() > 4 * config_.window_k) history_.pop_front();
  }
  if (episodes_.empty()) episodes_.push_back({active_, t, t, std::nullopt});
  update_source(t);

  // Output is clocked by arrivals of the active source.
  const std::optional<StampedPose>& dest = active_ == Source::kLio ? lio : vio;
  std::optional<FusedPose> out;
  if (transition_) {
    const double beta = config_.smoother.beta(t - transition_->t_start);
    const Source from = transition_->from;
    const std::optional<StampedPose>& latest_from = from == Source::kLio ? last_lio_ : last_vio_;
    const bool have_from = near(latest_from);
    if (beta < 1.0 && dest && have_from) {
      const Transform& align = active_ == Source::kLio ? align_lio_ : align_vio_;
      out = FusedPose{t,
                      apply_smoothing(mapped(from, latest_from->pose), dest->pose, align, beta,
                                      config_.smoother.convention),
                      active_, true, false};
    }
    if (beta >= 1.0) {
      transitions_.back().t_end = t;
      transition_.reset();
    }
  }
  if (!out && dest) {
    out = FusedPose{t, mapped(active_, dest->pose), active_, false, false};
  } else if (!out && active_ == Source::kVio && lio) {
    // VIO missing at a LIO stamp: fall back to LIO and flag it.
    out = FusedPose{t, mapped(Source::kLio, lio->pose), Source::kLio, false, true};
  }
  if (out && debounced_ && active_ == Source::kLio && !transition_) out->degraded = true;
  if (out) episodes_.back().t_end = t;
  return out;
}

std::vector<SourceEpisode> FusionSupervisor::episodes() const { return episodes_; }

std::vector<FusionEvent> merge_events(const Trajectory& lio, const Trajectory& vio,
                                      const std::vector<HealthSample>& health, std::optional<double> vio_init_time) {
  std::vector<FusionEvent> events;
  events.reserve(lio.size() + vio.size() + health.size() + 1);
  if (vio_init_time) events.emplace_back(VioInit{*vio_init_time, true});
  for (const auto& h : health) events.emplace_back(HealthEvent{h});
  for (const auto& p : lio) events.emplace_back(LioPose{p});
  for (const auto& p : vio) events.emplace_back(VioPose{p});
  std::stable_sort(events.begin(), events.end(), [](const FusionEvent& a, const FusionEvent& b) {
    const double ta = event_time(a), tb = event_time(b);
    if (ta != tb) return ta < tb;
    return event_rank(a) < event_rank(b);
  });
  return events;
}

Trajectory FusionResult::trajectory() const {
  Trajectory out;
  out.reserve(poses.size());
  for (const auto& p : poses) out.push_back({p.t, p.pose, std::nullopt});
  return out;
}

std::size_t FusionResult::vio_episode_count() const {
  return static_cast<std::size_t>(
      std::count_if(episodes.begin(), episodes.end(), [](const SourceEpisode& e) { return e.source == Source::kVio; }));
}

std::vector<Interval> FusionResult::vio_intervals() const {
  std::vector<Interval> out;
  for (const auto& e : episodes) {
    if (e.source == Source::kVio) out.push_back({e.t_start, e.t_end});
  }
  return out;
}

FusionResult run_fusion(const std::vector<FusionEvent>& events, const SupervisorConfig& config) {
  FusionSupervisor sup(config);
  FusionResult res;
  for (const auto& e : events) {
    if (auto p = sup.step(e)) res.poses.push_back(*p);
  }
  if (auto p = sup.flush()) res.poses.push_back(*p);
  res.transitions = sup.transitions();
  res.episodes = sup.episodes();
  res.log = sup.log();
  res.alignment_failures = sup.alignment_failures();
  return res;
}

std::vector<HealthSample> schedule_health(const std::vector<double>& stamps,
                                          const std::vector<sim::DegradationWindow>& schedule,
                                          const DetectorConfig& config) {
  DegeneracyDetector detector(config);
  std::vector<HealthSample> out;
  out.reserve(stamps.size());
  for (double t : stamps) {
    const bool degraded = std::any_of(schedule.begin(), schedule.end(), [t](const sim::DegradationWindow& w) {
      return w.subsystem == sim::Subsystem::kLio && w.contains(t);
    });
    out.push_back(detector.step_raw(t, degraded ? 1 : 0));
  }
  return out;
}

OfflineResult run_offline(const std::filesystem::path& scenario_dir, const OfflineConfig& config) {
  config.supervisor.validate();
  config.detector.validate();
  OfflineResult res;
  res.data = sim::read_scenario(scenario_dir);
  const auto scan_files = io::list_scans(res.data.scan_dir);
  if (config.health_source == HealthSource::kDetector) {
    std::vector<ScanFrame> scans(scan_files.size());
    std::string error;
#pragma omp parallel for schedule(dynamic, 8)
    for (std::size_t i = 0; i < scan_files.size(); ++i) {
      try {
        scans[i] = io::read_scan(scan_files[i]);
      } catch (const std::exception& e) {
#pragma omp critical
        if (error.empty()) error = e.what();
      }
    }
    if (!error.empty()) throw DataError(res.data.scan_dir.string(), error);
    res.health = detect(scans, config.detector, config.icp);
  } else {
    // Same stamps the detector would produce: every scan after the first.
    std::vector<double> stamps;
    const double rate = res.data.scenario.scan_rate;
    for (std::size_t i = 1; i < scan_files.size(); ++i) stamps.push_back(static_cast<double>(i) / rate);
    res.health = schedule_health(stamps, res.data.scenario.schedule, config.detector);
  }
  std::optional<double> init;
  if (!res.data.vio.empty()) init = std::max(res.data.scenario.vio_init_time, res.data.vio.front().t);
  res.fusion = run_fusion(merge_events(res.data.lio, res.data.vio, res.health, init), config.supervisor);
  return res;
}

nlohmann::ordered_json fusion_report(const OfflineResult& result, const nlohmann::ordered_json& config_echo) {
  using nlohmann::ordered_json;
  const FusionResult& f = result.fusion;
  ordered_json episodes = ordered_json::array();
  for (const auto& e : f.episodes) {
    ordered_json j;
    j["source"] = to_string(e.source);
    j["t_start"] = io::round9(e.t_start);
    j["t_end"] = io::round9(e.t_end);
    j["alignment"] = e.alignment ? alignment_json(*e.alignment) : ordered_json(nullptr);
    episodes.push_back(j);
  }
  ordered_json transitions = ordered_json::array();
  for (const auto& tr : f.transitions) {
    transitions.push_back({{"from", to_string(tr.from)},
                           {"to", to_string(tr.to)},
                           {"t_start", io::round9(tr.t_start)},
                           {"t_end", io::round9(tr.t_end)}});
  }
  std::size_t raw_count = 0;
  for (const auto& h : result.health) raw_count += h.raw ? 1 : 0;
  ordered_json health_eps = ordered_json::array();
  for (const auto& iv : rfusion::episodes(result.health)) {
    health_eps.push_back({{"t_start", io::round9(iv.t_start)}, {"t_end", io::round9(iv.t_end)}});
  }
  std::size_t degraded = 0, blended = 0;
  for (const auto& p : f.poses) {
    degraded += p.degraded ? 1 : 0;
    blended += p.blending ? 1 : 0;
  }
  ordered_json log = ordered_json::array();
  for (const auto& l : f.log) log.push_back({{"t", io::round9(l.t)}, {"message", l.message}});

  ordered_json r;
  r["vio_episode_count"] = f.vio_episode_count();
  r["episodes"] = episodes;
  r["transitions"] = transitions;
  r["health"] = {{"samples", result.health.size()},
                 {"raw_degraded", raw_count},
                 {"episodes", health_eps},
                 {"series", "health.csv"}};
  r["alignment_failures"] = f.alignment_failures;
  r["output"] = {{"poses", f.poses.size()}, {"degraded", degraded}, {"blended", blended}};
  r["log"] = log;
  r["config"] = config_echo;
  return r;
}

void write_fusion_outputs(const std::filesystem::path& out_dir, const OfflineResult& result,
                          const nlohmann::ordered_json& config_echo) {
  io::write_tum(out_dir / "fused.tum", result.fusion.trajectory(), "fused odometry, LIO frame");
  write_health_csv(out_dir / "health.csv", result.health);
  io::write_json(out_dir / "report.json", fusion_report(result, config_echo));
}

}  // namespace rfusion
