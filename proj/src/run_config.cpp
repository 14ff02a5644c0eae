#include "rfusion/run_config.hpp"

#include <set>
#include <stdexcept>
#include <string>

#include "rfusion/io.hpp"

namespace rfusion {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw std::invalid_argument("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("bad type for '" + std::string(key) + "' in " + where);
  }
}

}  // namespace

void RunConfig::validate() const {
  detector.validate();
  supervisor.validate();
  if (!(evaluation.tolerance >= 0.0)) throw std::invalid_argument("evaluation tolerance must be >= 0");
  if (!(evaluation.rpe_delta > 0.0)) throw std::invalid_argument("rpe_delta must be > 0");
  if (scenario) scenario->validate();
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown(j, {"scenario", "detector", "alignment", "smoother", "health_source", "evaluation", "seed"}, "config");
  RunConfig c;
  read_opt(j, "seed", c.seed, "config");
  if (j.contains("scenario")) {
    const json& s = j.at("scenario");
    c.scenario = s.is_string() ? sim::named_scenario(s.get<std::string>()) : sim::scenario_from_json(s);
  }
  if (j.contains("detector")) {
    const json& d = j.at("detector");
    reject_unknown(d, {"tau_n", "tau_eps", "debounce_on", "debounce_off", "use_hessian", "tau_hessian"}, "detector");
    read_opt(d, "tau_n", c.detector.tau_n, "detector");
    read_opt(d, "tau_eps", c.detector.tau_eps, "detector");
    read_opt(d, "debounce_on", c.detector.debounce_on, "detector");
    read_opt(d, "debounce_off", c.detector.debounce_off, "detector");
    read_opt(d, "use_hessian", c.detector.use_hessian, "detector");
    read_opt(d, "tau_hessian", c.detector.tau_hessian, "detector");
  }
  if (j.contains("alignment")) {
    const json& a = j.at("alignment");
    reject_unknown(a, {"cauchy_c", "window_k", "k_min", "pair_tolerance", "max_iters", "continuous"}, "alignment");
    read_opt(a, "cauchy_c", c.supervisor.align.cauchy_c, "alignment");
    read_opt(a, "window_k", c.supervisor.window_k, "alignment");
    read_opt(a, "k_min", c.supervisor.align.k_min, "alignment");
    read_opt(a, "pair_tolerance", c.supervisor.pair_tolerance, "alignment");
    read_opt(a, "max_iters", c.supervisor.align.max_iters, "alignment");
    read_opt(a, "continuous", c.supervisor.continuous_alignment, "alignment");
  }
  if (j.contains("smoother")) {
    const json& s = j.at("smoother");
    reject_unknown(s, {"duration", "schedule", "convention"}, "smoother");
    read_opt(s, "duration", c.supervisor.smoother.duration, "smoother");
    if (s.contains("schedule")) c.supervisor.smoother.schedule = beta_schedule_from_string(s.at("schedule").get<std::string>());
    if (s.contains("convention")) {
      c.supervisor.smoother.convention = smoothing_convention_from_string(s.at("convention").get<std::string>());
    }
  }
  if (j.contains("health_source")) c.health_source = health_source_from_string(j.at("health_source").get<std::string>());
  if (j.contains("evaluation")) {
    const json& e = j.at("evaluation");
    reject_unknown(e, {"alignment", "tolerance", "rpe_delta"}, "evaluation");
    if (e.contains("alignment")) c.evaluation.alignment = alignment_mode_from_string(e.at("alignment").get<std::string>());
    read_opt(e, "tolerance", c.evaluation.tolerance, "evaluation");
    read_opt(e, "rpe_delta", c.evaluation.rpe_delta, "evaluation");
  }
  c.validate();
  return c;
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  if (c.scenario) j["scenario"] = sim::to_json(*c.scenario);
  j["seed"] = c.seed;
  j["detector"] = {{"tau_n", io::round9(c.detector.tau_n)},
                   {"tau_eps", io::round9(c.detector.tau_eps)},
                   {"debounce_on", c.detector.debounce_on},
                   {"debounce_off", c.detector.debounce_off},
                   {"use_hessian", c.detector.use_hessian},
                   {"tau_hessian", io::round9(c.detector.tau_hessian)}};
  j["alignment"] = {{"cauchy_c", io::round9(c.supervisor.align.cauchy_c)},
                    {"window_k", c.supervisor.window_k},
                    {"k_min", c.supervisor.align.k_min},
                    {"pair_tolerance", io::round9(c.supervisor.pair_tolerance)},
                    {"max_iters", c.supervisor.align.max_iters},
                    {"continuous", c.supervisor.continuous_alignment}};
  j["smoother"] = {{"duration", io::round9(c.supervisor.smoother.duration)},
                   {"schedule", to_string(c.supervisor.smoother.schedule)},
                   {"convention", to_string(c.supervisor.smoother.convention)}};
  j["health_source"] = to_string(c.health_source);
  j["evaluation"] = {{"alignment", to_string(c.evaluation.alignment)},
                     {"tolerance", io::round9(c.evaluation.tolerance)},
                     {"rpe_delta", io::round9(c.evaluation.rpe_delta)}};
  return j;
}

}  // namespace rfusion
