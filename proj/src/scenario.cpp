#include "rfusion/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "rfusion/io.hpp"

namespace rfusion::sim {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::kCorridorLoop: return "corridor_loop";
    case TrajectoryKind::kElevator: return "elevator";
    case TrajectoryKind::kFigureEight: return "figure_eight";
  }
  return "?";
}

std::string to_string(Subsystem s) { return s == Subsystem::kLio ? "LIO" : "VIO"; }

std::string to_string(DegradationMode m) {
  switch (m) {
    case DegradationMode::kAxisDrift: return "axis_drift";
    case DegradationMode::kRandomWalkBoost: return "random_walk_boost";
    case DegradationMode::kDropout: return "dropout";
  }
  return "?";
}

TrajectoryKind trajectory_kind_from_string(const std::string& s) {
  if (s == "corridor_loop") return TrajectoryKind::kCorridorLoop;
  if (s == "elevator") return TrajectoryKind::kElevator;
  if (s == "figure_eight") return TrajectoryKind::kFigureEight;
  throw std::invalid_argument("unknown trajectory kind '" + s + "'");
}

Subsystem subsystem_from_string(const std::string& s) {
  if (s == "LIO") return Subsystem::kLio;
  if (s == "VIO") return Subsystem::kVio;
  throw std::invalid_argument("unknown subsystem '" + s + "'");
}

DegradationMode degradation_mode_from_string(const std::string& s) {
  if (s == "axis_drift") return DegradationMode::kAxisDrift;
  if (s == "random_walk_boost") return DegradationMode::kRandomWalkBoost;
  if (s == "dropout") return DegradationMode::kDropout;
  throw std::invalid_argument("unknown degradation mode '" + s + "'");
}

void Scenario::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be positive");
  };
  positive(duration, "duration");
  positive(pose_rate, "pose_rate");
  positive(scan_rate, "scan_rate");
  const auto& g = geometry;
  positive(g.corridor_length, "corridor_length");
  positive(g.corridor_side, "corridor_side");
  positive(g.corridor_width, "corridor_width");
  positive(g.corridor_height, "corridor_height");
  positive(g.corner_radius, "corner_radius");
  positive(g.sensor_height, "sensor_height");
  positive(g.elevator_rise, "elevator_rise");
  positive(g.figure_eight_size, "figure_eight_size");
  if (g.sensor_height >= g.corridor_height) throw std::invalid_argument("sensor_height must be below the ceiling");
  if (kind == TrajectoryKind::kCorridorLoop) {
    if (g.corridor_side <= g.corridor_width || g.corridor_length <= g.corridor_width) {
      throw std::invalid_argument("corridor loop sides must exceed the corridor width");
    }
    if (g.corner_radius > 0.5 * g.corridor_width) {
      throw std::invalid_argument("corner_radius must not exceed half the corridor width");
    }
  }
  positive(sensor.max_range, "max_range");
  positive(sensor.vertical_fov_deg, "vertical_fov_deg");
  if (sensor.azimuth_steps < 1 || sensor.channels < 1) throw std::invalid_argument("sensor pattern must be non-empty");
  if (noise.scan_sigma < 0 || noise.degraded_scan_sigma < 0 || noise.lio_walk_sigma < 0 ||
      noise.lio_rot_walk_sigma < 0 || noise.vio_walk_sigma < 0 || noise.vio_rot_walk_sigma < 0) {
    throw std::invalid_argument("noise sigmas must be non-negative");
  }
  if (vio_init_time < 0.0) throw std::invalid_argument("vio_init_time must be non-negative");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& w = schedule[i];
    if (!(w.t_start < w.t_end)) throw std::invalid_argument("degradation window needs t_start < t_end");
    if (w.t_start < 0.0 || w.t_end > duration) throw std::invalid_argument("degradation window outside [0, duration]");
    if (!std::isfinite(w.magnitude)) throw std::invalid_argument("degradation magnitude must be finite");
    for (std::size_t j = 0; j < i; ++j) {
      const auto& o = schedule[j];
      if (o.subsystem == w.subsystem && w.t_start < o.t_end && o.t_start < w.t_end) {
        throw std::invalid_argument("degradation windows overlap for " + to_string(w.subsystem));
      }
    }
  }
}

std::size_t Scenario::scan_count() const {
  return static_cast<std::size_t>(std::floor(duration * scan_rate + 1e-9));
}

std::size_t Scenario::pose_count() const {
  return static_cast<std::size_t>(std::floor(duration * pose_rate + 1e-9)) + 1;
}

std::vector<std::string> scenario_names() {
  return {"corridor01-synth", "corridor01-synth-clean", "corridor02-synth", "elevator01-synth", "figure8-synth"};
}

Scenario named_scenario(const std::string& name) {
  Scenario s;
  s.name = name;
  s.vio_to_lio = Transform(exp_so3(Vec3(0.02, -0.01, 0.6)), Vec3(1.2, -0.8, 0.3));
  const DegradationMode drift = DegradationMode::kAxisDrift;
  if (name == "corridor01-synth") {
    s.schedule = {{Subsystem::kLio, 50.0, 80.0, drift, 0.15}, {Subsystem::kLio, 200.0, 250.0, drift, 0.15}};
  } else if (name == "corridor01-synth-clean") {
  } else if (name == "corridor02-synth") {
    s.schedule = {{Subsystem::kLio, 50.0, 80.0, drift, 0.5}, {Subsystem::kLio, 200.0, 250.0, drift, 0.5}};
  } else if (name == "elevator01-synth") {
    // The cabin moves with the robot, so LIO does not see the rise.
    s.kind = TrajectoryKind::kElevator;
    s.duration = 70.0;
    s.noise.degraded_scan_sigma = s.noise.scan_sigma;
    s.schedule = {{Subsystem::kLio, 25.0, 37.0, drift, -0.5}};
  } else if (name == "figure8-synth") {
    s.kind = TrajectoryKind::kFigureEight;
    s.duration = 120.0;
    s.schedule = {{Subsystem::kVio, 60.0, 70.0, DegradationMode::kDropout, 0.0}};
  } else {
    std::string valid;
    for (const auto& n : scenario_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown scenario '" + name + "'; valid names: " + valid);
  }
  return s;
}

ordered_json schedule_json(const std::vector<DegradationWindow>& schedule) {
  ordered_json arr = ordered_json::array();
  for (const auto& w : schedule) {
    ordered_json j;
    j["subsystem"] = to_string(w.subsystem);
    j["t_start"] = io::round9(w.t_start);
    j["t_end"] = io::round9(w.t_end);
    j["mode"] = to_string(w.mode);
    j["magnitude"] = io::round9(w.magnitude);
    arr.push_back(j);
  }
  return arr;
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
  std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw std::invalid_argument("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::vector<DegradationWindow> schedule_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("schedule must be an array");
  std::vector<DegradationWindow> out;
  for (const auto& w : j) {
    reject_unknown(w, {"subsystem", "t_start", "t_end", "mode", "magnitude"}, "schedule entry");
    DegradationWindow d;
    d.subsystem = subsystem_from_string(w.at("subsystem").get<std::string>());
    d.t_start = w.at("t_start").get<double>();
    d.t_end = w.at("t_end").get<double>();
    d.mode = degradation_mode_from_string(w.at("mode").get<std::string>());
    d.magnitude = w.value("magnitude", 0.0);
    out.push_back(d);
  }
  return out;
}

ordered_json to_json(const Scenario& s) {
  ordered_json j;
  j["name"] = s.name;
  j["duration"] = io::round9(s.duration);
  j["pose_rate"] = io::round9(s.pose_rate);
  j["scan_rate"] = io::round9(s.scan_rate);
  j["kind"] = to_string(s.kind);
  j["seed"] = s.seed;
  j["vio_init_time"] = io::round9(s.vio_init_time);
  j["vio_to_lio"] = io::transform_json(s.vio_to_lio);
  const auto& g = s.geometry;
  j["geometry"] = {{"corridor_length", io::round9(g.corridor_length)},
                   {"corridor_side", io::round9(g.corridor_side)},
                   {"corridor_width", io::round9(g.corridor_width)},
                   {"corridor_height", io::round9(g.corridor_height)},
                   {"corner_radius", io::round9(g.corner_radius)},
                   {"sensor_height", io::round9(g.sensor_height)},
                   {"elevator_rise", io::round9(g.elevator_rise)},
                   {"figure_eight_size", io::round9(g.figure_eight_size)}};
  const auto& n = s.noise;
  j["noise"] = {{"scan_sigma", io::round9(n.scan_sigma)},
                {"degraded_scan_sigma", io::round9(n.degraded_scan_sigma)},
                {"lio_walk_sigma", io::round9(n.lio_walk_sigma)},
                {"lio_rot_walk_sigma", io::round9(n.lio_rot_walk_sigma)},
                {"vio_walk_sigma", io::round9(n.vio_walk_sigma)},
                {"vio_rot_walk_sigma", io::round9(n.vio_rot_walk_sigma)}};
  j["sensor"] = {{"azimuth_steps", s.sensor.azimuth_steps},
                 {"channels", s.sensor.channels},
                 {"vertical_fov_deg", io::round9(s.sensor.vertical_fov_deg)},
                 {"max_range", io::round9(s.sensor.max_range)}};
  j["schedule"] = schedule_json(s.schedule);
  return j;
}

Scenario scenario_from_json(const json& j) {
  reject_unknown(j, {"name", "duration", "pose_rate", "scan_rate", "kind", "seed", "vio_init_time", "vio_to_lio",
                     "geometry", "noise", "sensor", "schedule"},
                 "scenario");
  // A known name provides the base configuration; listed keys override it.
  Scenario s;
  const std::string name = j.value("name", std::string("custom"));
  const auto names = scenario_names();
  if (std::find(names.begin(), names.end(), name) != names.end()) s = named_scenario(name);
  s.name = name;
  read_opt(j, "duration", s.duration);
  read_opt(j, "pose_rate", s.pose_rate);
  read_opt(j, "scan_rate", s.scan_rate);
  if (j.contains("kind")) s.kind = trajectory_kind_from_string(j.at("kind").get<std::string>());
  read_opt(j, "seed", s.seed);
  read_opt(j, "vio_init_time", s.vio_init_time);
  if (j.contains("vio_to_lio")) s.vio_to_lio = io::transform_from_json(j.at("vio_to_lio"));
  if (j.contains("geometry")) {
    const auto& g = j.at("geometry");
    reject_unknown(g, {"corridor_length", "corridor_side", "corridor_width", "corridor_height", "corner_radius",
                       "sensor_height", "elevator_rise", "figure_eight_size"},
                   "geometry");
    read_opt(g, "corridor_length", s.geometry.corridor_length);
    read_opt(g, "corridor_side", s.geometry.corridor_side);
    read_opt(g, "corridor_width", s.geometry.corridor_width);
    read_opt(g, "corridor_height", s.geometry.corridor_height);
    read_opt(g, "corner_radius", s.geometry.corner_radius);
    read_opt(g, "sensor_height", s.geometry.sensor_height);
    read_opt(g, "elevator_rise", s.geometry.elevator_rise);
    read_opt(g, "figure_eight_size", s.geometry.figure_eight_size);
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    reject_unknown(n, {"scan_sigma", "degraded_scan_sigma", "lio_walk_sigma", "lio_rot_walk_sigma", "vio_walk_sigma",
                       "vio_rot_walk_sigma"},
                   "noise");
    read_opt(n, "scan_sigma", s.noise.scan_sigma);
    read_opt(n, "degraded_scan_sigma", s.noise.degraded_scan_sigma);
    read_opt(n, "lio_walk_sigma", s.noise.lio_walk_sigma);
    read_opt(n, "lio_rot_walk_sigma", s.noise.lio_rot_walk_sigma);
    read_opt(n, "vio_walk_sigma", s.noise.vio_walk_sigma);
    read_opt(n, "vio_rot_walk_sigma", s.noise.vio_rot_walk_sigma);
  }
  if (j.contains("sensor")) {
    const auto& se = j.at("sensor");
    reject_unknown(se, {"azimuth_steps", "channels", "vertical_fov_deg", "max_range"}, "sensor");
    read_opt(se, "azimuth_steps", s.sensor.azimuth_steps);
    read_opt(se, "channels", s.sensor.channels);
    read_opt(se, "vertical_fov_deg", s.sensor.vertical_fov_deg);
    read_opt(se, "max_range", s.sensor.max_range);
  }
  if (j.contains("schedule")) s.schedule = schedule_from_json(j.at("schedule"));
  s.validate();
  return s;
}

}  // namespace rfusion::sim
