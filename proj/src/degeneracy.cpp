#include "rfusion/degeneracy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "rfusion/errors.hpp"
#include "rfusion/io.hpp"

namespace rfusion {

namespace {

std::vector<Interval> merged(std::vector<Interval> v) {
  std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) { return a.t_start < b.t_start; });
  std::vector<Interval> out;
  for (const auto& i : v) {
    if (!(i.t_end > i.t_start)) continue;
    if (!out.empty() && i.t_start <= out.back().t_end) {
      out.back().t_end = std::max(out.back().t_end, i.t_end);
    } else {
      out.push_back(i);
    }
  }
  return out;
}

double total_length(const std::vector<Interval>& v) {
  double sum = 0.0;
  for (const auto& i : v) sum += i.length();
  return sum;
}

}  // namespace

void DetectorConfig::validate() const {
  if (!(tau_n >= 0.0)) throw std::invalid_argument("tau_n must be >= 0");
  if (!(tau_eps > 0.0)) throw std::invalid_argument("tau_eps must be > 0");
  if (debounce_on < 1 || debounce_off < 1) throw std::invalid_argument("debounce counts must be >= 1");
  if (use_hessian && !(tau_hessian >= 0.0)) throw std::invalid_argument("tau_hessian must be >= 0");
}

int evaluate(const MatchReport& report, const DetectorConfig& config) {
  if (!std::isfinite(report.eps_align)) return 1;
  if (static_cast<double>(report.n_feat) < config.tau_n) return 1;
  if (report.eps_align > config.tau_eps) return 1;
  if (config.use_hessian && report.hessian_min_eig < config.tau_hessian) return 1;
  return 0;
}

DegeneracyDetector::DegeneracyDetector(DetectorConfig config) : config_(config) { config_.validate(); }

HealthSample DegeneracyDetector::step(double t, const MatchReport& report) {
  return step_raw(t, evaluate(report, config_), report.n_feat, report.eps_align);
}

HealthSample DegeneracyDetector::step_raw(double t, int raw, std::size_t n_feat, double eps_align) {
  if (last_t_ && !(t > *last_t_)) {
    throw StreamError("health samples out of order at t=" + io::fmt_time(t));
  }
  last_t_ = t;
  HealthSample s;
  s.t = t;
  s.n_feat = n_feat;
  s.eps_align = eps_align;
  s.raw = raw ? 1 : 0;
  run_ = s.raw != state_ ? run_ + 1 : 0;
  if (run_ >= (state_ == 0 ? config_.debounce_on : config_.debounce_off)) {
    state_ = s.raw;
    run_ = 0;
  }
  s.debounced = state_;
  return s;
}

std::vector<MatchReport> match_scan_sequence(const std::vector<ScanFrame>& scans, const IcpParams& params) {
  std::vector<MatchReport> reports;
  if (scans.size() < 2) return reports;
  reports.reserve(scans.size() - 1);
  Transform prior;  // previous frame-to-frame motion
  for (std::size_t i = 1; i < scans.size(); ++i) {
    IcpParams p = params;
    p.initial_guess = prior;
    const IcpResult r = icp_align(scans[i], scans[i - 1], p);
    prior = r.report.converged ? r.transform : Transform();
    reports.push_back(r.report);
  }
  return reports;
}

std::vector<HealthSample> detect_reports(const std::vector<double>& stamps, const std::vector<MatchReport>& reports,
                                         const DetectorConfig& config) {
  if (stamps.size() != reports.size()) throw std::invalid_argument("one timestamp per report required");
  DegeneracyDetector detector(config);
  std::vector<HealthSample> out;
  out.reserve(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) out.push_back(detector.step(stamps[i], reports[i]));
  return out;
}

std::vector<HealthSample> detect(const std::vector<ScanFrame>& scans, const DetectorConfig& config,
                                 const IcpParams& params) {
  config.validate();
  IcpParams p = params;
  // The diagnostic is the costly part of a match; skip it unless it is used.
  p.compute_hessian = params.compute_hessian && config.use_hessian;
  const auto reports = match_scan_sequence(scans, p);
  std::vector<double> stamps;
  for (std::size_t i = 1; i < scans.size(); ++i) stamps.push_back(scans[i].timestamp);
  return detect_reports(stamps, reports, config);
}

std::vector<Interval> episodes(const std::vector<HealthSample>& samples) {
  std::vector<Interval> out;
  std::optional<double> start;
  for (const auto& s : samples) {
    if (s.debounced && !start) start = s.t;
    if (!s.debounced && start) {
      out.push_back({*start, s.t});
      start.reset();
    }
  }
  if (start) out.push_back({*start, samples.back().t});
  return out;
}

double interval_iou(const std::vector<Interval>& a, const std::vector<Interval>& b) {
  const auto ma = merged(a);
  const auto mb = merged(b);
  double inter = 0.0;
  for (const auto& x : ma) {
    for (const auto& y : mb) {
      inter += std::max(0.0, std::min(x.t_end, y.t_end) - std::max(x.t_start, y.t_start));
    }
  }
  const double uni = total_length(ma) + total_length(mb) - inter;
  return uni > 0.0 ? inter / uni : 1.0;
}

void write_health_csv(const std::filesystem::path& path, const std::vector<HealthSample>& samples) {
  std::string out = "t,n_feat,eps_align,raw,debounced\n";
  for (const auto& s : samples) {
    out += io::fmt_time(s.t) + ',' + std::to_string(s.n_feat) + ',' + io::fmt9(s.eps_align) + ',' +
           std::to_string(s.raw) + ',' + std::to_string(s.debounced) + '\n';
  }
  io::write_text(path, out);
}

std::vector<HealthSample> read_health_csv(const std::filesystem::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,n_feat,eps_align,raw,debounced", 0) != 0) {
    throw DataError(path.string(), "missing health header");
  }
  std::vector<HealthSample> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    HealthSample s;
    std::string eps;
    if (!(fields >> s.t >> s.n_feat >> eps >> s.raw >> s.debounced)) {
      throw DataError(path.string(), "line " + std::to_string(lineno) + ": expected 5 fields");
    }
    try {
      s.eps_align = std::stod(eps);
    } catch (const std::exception&) {
      throw DataError(path.string(), "line " + std::to_string(lineno) + ": bad eps_align");
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace rfusion
