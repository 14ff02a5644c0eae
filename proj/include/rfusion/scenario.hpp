#pragma once

// Deterministic synthetic scenarios: ground-truth paths through simple indoor
// geometry, ray-cast LiDAR scans, drifting LIO/VIO pose streams and the
// degradation schedule that drives them. Every output is a pure function of
// the scenario configuration (which includes the seed).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rfusion/pose.hpp"
#include "rfusion/scan_match.hpp"

namespace rfusion::sim {

enum class TrajectoryKind { kCorridorLoop, kElevator, kFigureEight };
enum class Subsystem { kLio, kVio };
enum class DegradationMode {
  kAxisDrift,        // magnitude m/s added along the direction of travel
  kRandomWalkBoost,  // random-walk sigma multiplied by magnitude
  kDropout,          // no poses emitted
};

std::string to_string(TrajectoryKind k);
std::string to_string(Subsystem s);
std::string to_string(DegradationMode m);
TrajectoryKind trajectory_kind_from_string(const std::string& s);
Subsystem subsystem_from_string(const std::string& s);
DegradationMode degradation_mode_from_string(const std::string& s);

struct DegradationWindow {
  Subsystem subsystem = Subsystem::kLio;
  double t_start = 0.0;
  double t_end = 0.0;
  DegradationMode mode = DegradationMode::kAxisDrift;
  double magnitude = 0.0;

  bool contains(double t) const { return t >= t_start && t < t_end; }
};

struct GeometryParams {
  double corridor_length = 40.0;  // long side of the loop centerline, m
  double corridor_side = 16.0;    // short side of the loop centerline, m
  double corridor_width = 3.0;
  double corridor_height = 3.0;
  double corner_radius = 1.0;     // path blending radius at loop corners
  double sensor_height = 0.5;
  double elevator_rise = 6.0;
  double figure_eight_size = 8.0;  // lemniscate half-width, m
};

struct NoiseParams {
  double scan_sigma = 0.01;           // m
  double degraded_scan_sigma = 0.3;   // m, scans inside LIO windows
  double lio_walk_sigma = 0.002;      // m / sqrt(s) per axis
  double lio_rot_walk_sigma = 2e-4;   // rad / sqrt(s) per axis
  double vio_walk_sigma = 0.004;
  double vio_rot_walk_sigma = 4e-4;
};

struct SensorParams {
  int azimuth_steps = 120;
  int channels = 16;
  double vertical_fov_deg = 59.0;
  double max_range = 40.0;
};

struct Scenario {
  std::string name = "custom";
  double duration = 300.0;   // s
  double pose_rate = 10.0;   // Hz
  double scan_rate = 5.0;    // Hz
  TrajectoryKind kind = TrajectoryKind::kCorridorLoop;
  GeometryParams geometry;
  NoiseParams noise;
  SensorParams sensor;
  std::vector<DegradationWindow> schedule;
  std::uint64_t seed = 7;
  Transform vio_to_lio;       // true VIO -> LIO frame offset
  double vio_init_time = 2.0;  // s

  // Throws std::invalid_argument on non-positive geometry, rates or bad windows.
  void validate() const;
  std::size_t scan_count() const;
  std::size_t pose_count() const;
};

std::vector<std::string> scenario_names();
// Throws std::invalid_argument naming the valid scenarios.
Scenario named_scenario(const std::string& name);

nlohmann::ordered_json to_json(const Scenario& s);
nlohmann::ordered_json schedule_json(const std::vector<DegradationWindow>& schedule);
std::vector<DegradationWindow> schedule_from_json(const nlohmann::json& j);
// Keys absent from `j` keep their defaults; unknown keys throw std::invalid_argument.
Scenario scenario_from_json(const nlohmann::json& j);

// ----- geometry ------------------------------------------------------------

struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  bool strictly_contains(const Vec3& p) const {
    return (p.array() > lo.array()).all() && (p.array() < hi.array()).all();
  }
};

// Axis-aligned rectangle, double sided. `lo`/`hi` bound the two remaining axes
// in increasing axis order.
struct Quad {
  int axis = 0;
  double coord = 0.0;
  double lo[2] = {0.0, 0.0};
  double hi[2] = {0.0, 0.0};
};

struct CabinState {
  double lift = 0.0;          // m above the ground floor
  bool doors_closed = false;
};

class World {
 public:
  std::vector<Aabb> rooms;    // free space is the union of rooms ...
  std::vector<Aabb> solids;   // ... minus these
  std::vector<Aabb> feature_boxes;
  std::vector<Quad> quads;
  std::vector<Quad> cabin_quads;  // at lift 0
  std::optional<Quad> cabin_door;

  // Free-space box bounded by its six faces.
  void add_room(const Aabb& room);
  // Obstacle box; feature boxes also count for distance_to_features.
  void add_solid(const Aabb& box, bool feature = true);

  // Distance to the first surface along unit `dir`, or nullopt beyond max_range.
  std::optional<double> cast(const Vec3& origin, const Vec3& dir, double max_range,
                             const CabinState& cabin = {}) const;
  bool is_free(const Vec3& p) const;
  // Distance from p to the nearest feature box (infinity when there are none).
  double distance_to_features(const Vec3& p) const;
};

World build_world(const Scenario& s);

// ----- trajectories --------------------------------------------------------

// Ground-truth sensor pose (LIO frame) at time t, clamped to [0, duration].
Transform pose_at(const Scenario& s, double t);
// Unit direction of travel at t; zero while stationary.
Vec3 travel_direction(const Scenario& s, double t);
CabinState cabin_at(const Scenario& s, double t);
// Analytic path length of the trajectory.
double path_length(const Scenario& s);
// Distance from a corridor-loop position to the nearest loop corner.
double distance_to_corner(const Scenario& s, const Vec3& p);

// Poses at pose_rate from 0 to duration inclusive. Throws std::invalid_argument
// on non-positive geometry.
Trajectory gen_trajectory(const Scenario& s);

// ----- sensors -------------------------------------------------------------

// One scan from `pose`. Noise is isotropic Gaussian in the sensor frame and
// seeded by `seed` alone. Throws std::invalid_argument outside free space.
ScanFrame synth_scan(const Transform& pose, const World& world, const SensorParams& sensor,
                     double sigma, std::uint64_t seed, double timestamp = 0.0,
                     const CabinState& cabin = {});
// The index-th scan of the scenario (timestamp index / scan_rate).
ScanFrame synth_scenario_scan(const Scenario& s, const World& world, std::size_t index);
// All scans; OpenMP-parallel over scans, identical to the serial version.
std::vector<ScanFrame> synth_scans(const Scenario& s, const World& world);
std::vector<ScanFrame> synth_scans_serial(const Scenario& s, const World& world);
// Scan noise sigma at time t (degraded inside LIO windows).
double scan_sigma_at(const Scenario& s, double t);

// LIO stream in the LIO frame; VIO stream in its own frame (vio_to_lio^-1 * gt).
Trajectory synth_odometry(const Trajectory& gt, Subsystem subsystem, const Scenario& s);

// ----- files ---------------------------------------------------------------

// gt.tum, lio.tum, vio.tum, lio.cov.csv, vio.cov.csv, scans/scan_*.xyz,
// schedule.json, scenario.json.
void write_scenario(const Scenario& s, const std::filesystem::path& dir);

struct ScenarioData {
  Scenario scenario;
  Trajectory gt;
  Trajectory lio;
  Trajectory vio;
  std::filesystem::path scan_dir;
};

// Throws DataError naming the first missing or malformed file.
ScenarioData read_scenario(const std::filesystem::path& dir);

}  // namespace rfusion::sim
