#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "rfusion/scenario.hpp"

namespace rfusion::sim {

namespace {

constexpr double kPi = std::numbers::pi;
// Lemniscate constant; a Bernoulli lemniscate of half-width a has length 2 * kVarpi * a.
constexpr double kVarpi = 2.62205755429211981046;
constexpr int kFigureEightLaps = 2;

// Elevator timeline (seconds).
constexpr double kApproachEnd = 22.0;
constexpr double kRiseStart = 25.0;
constexpr double kRiseSpeed = 0.5;  // m/s, also the horizontal speed
constexpr double kDoorsCloseAt = 23.0;
constexpr double kApproachStartX = -10.0;
constexpr double kCabinX = 1.0;

struct PathPoint {
  Vec3 position = Vec3::Zero();
  Vec3 tangent = Vec3::Zero();  // unit, zero while stationary
  double yaw = 0.0;
};

Transform pose_from(const PathPoint& p) {
  return Transform(exp_so3(Vec3(0.0, 0.0, p.yaw)), p.position);
}

// ----- corridor loop -------------------------------------------------------

double corridor_perimeter(const GeometryParams& g) {
  const double r = g.corner_radius;
  return 2.0 * (g.corridor_length + g.corridor_side) - 8.0 * r + 2.0 * kPi * r;
}

// Arc-length parameterized loop through the rectangle (0,0)-(L,S) with
// quarter-circle corners, starting at (r, 0) heading +x, counterclockwise.
PathPoint corridor_point(const GeometryParams& g, double s) {
  const double L = g.corridor_length;
  const double S = g.corridor_side;
  const double r = g.corner_radius;
  const double arc = 0.5 * kPi * r;
  const double lx = L - 2.0 * r;
  const double ly = S - 2.0 * r;
  struct Corner {
    double cx, cy, a0;
  };
  // Straight segments start at these points and headings.
  const std::array<Vec3, 4> starts = {Vec3(r, 0, 0), Vec3(L, r, 0), Vec3(L - r, S, 0), Vec3(0, S - r, 0)};
  const std::array<double, 4> lengths = {lx, ly, lx, ly};
  const std::array<Corner, 4> corners = {
      Corner{L - r, r, -0.5 * kPi}, Corner{L - r, S - r, 0.0}, Corner{r, S - r, 0.5 * kPi}, Corner{r, r, kPi}};
  PathPoint p;
  for (int k = 0; k < 4; ++k) {
    const double heading = 0.5 * kPi * k;
    const Vec3 dir(std::cos(heading), std::sin(heading), 0.0);
    if (s <= lengths[k]) {
      p.position = starts[k] + s * dir;
      p.tangent = dir;
      p.yaw = heading;
      break;
    }
    s -= lengths[k];
    if (s <= arc || k == 3) {
      const double a = corners[k].a0 + std::min(s, arc) / r;
      p.position = Vec3(corners[k].cx + r * std::cos(a), corners[k].cy + r * std::sin(a), 0.0);
      p.yaw = heading + std::min(s, arc) / r;
      p.tangent = Vec3(std::cos(p.yaw), std::sin(p.yaw), 0.0);
      break;
    }
    s -= arc;
  }
  p.position.z() = g.sensor_height;
  return p;
}

// ----- figure eight --------------------------------------------------------

Vec3 lemniscate(double theta) {
  const double s = std::sin(theta), c = std::cos(theta);
  const double d = 1.0 + s * s;
  return {c / d, s * c / d, 0.0};
}

// Unit-size lemniscate speed |d/dtheta|.
double lemniscate_speed(double theta) {
  const double s = std::sin(theta);
  return 1.0 / std::sqrt(1.0 + s * s);
}

// Arc length of the unit lemniscate on [a, b] by 8-point Gauss-Legendre.
double lemniscate_arc(double a, double b) {
  static constexpr double x[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
  static constexpr double w[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
  const double m = 0.5 * (a + b), h = 0.5 * (b - a);
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) sum += w[i] * (lemniscate_speed(m - h * x[i]) + lemniscate_speed(m + h * x[i]));
  return h * sum;
}

constexpr int kLemniscateTable = 1024;

const std::array<double, kLemniscateTable + 1>& lemniscate_table() {
  static const auto table = [] {
    std::array<double, kLemniscateTable + 1> t{};
    const double step = 2.0 * kPi / kLemniscateTable;
    for (int i = 1; i <= kLemniscateTable; ++i) t[i] = t[i - 1] + lemniscate_arc((i - 1) * step, i * step);
    return t;
  }();
  return table;
}

// Parameter angle at unit-lemniscate arc length s in [0, 2 * kVarpi].
double lemniscate_theta(double s) {
  const auto& table = lemniscate_table();
  const double total = table.back();
  s = std::clamp(s * total / (2.0 * kVarpi), 0.0, total);
  const auto it = std::upper_bound(table.begin(), table.end(), s);
  const int i = std::clamp(static_cast<int>(it - table.begin()) - 1, 0, kLemniscateTable - 1);
  const double step = 2.0 * kPi / kLemniscateTable;
  const double theta0 = i * step;
  double theta = theta0 + (s - table[i]) / lemniscate_speed(theta0);
  for (int iter = 0; iter < 6; ++iter) {
    const double f = table[i] + lemniscate_arc(theta0, theta) - s;
    theta -= f / lemniscate_speed(theta);
  }
  return theta;
}

PathPoint figure_eight_point(const GeometryParams& g, double s_unit) {
  const double a = g.figure_eight_size;
  const double theta = lemniscate_theta(s_unit);
  PathPoint p;
  p.position = a * lemniscate(theta);
  p.position.z() = g.sensor_height;
  const double sn = std::sin(theta), cs = std::cos(theta);
  const double d = 1.0 + sn * sn;
  const Vec3 deriv(-sn * (d + 2.0 * cs * cs), (cs * cs - sn * sn) * d - 2.0 * sn * sn * cs * cs, 0.0);
  p.tangent = deriv.normalized();
  p.yaw = std::atan2(p.tangent.y(), p.tangent.x());
  return p;
}

// ----- elevator ------------------------------------------------------------

double rise_end(const GeometryParams& g) { return kRiseStart + g.elevator_rise / kRiseSpeed; }
double reverse_start(const GeometryParams& g) { return rise_end(g) + (kRiseStart - kApproachEnd); }
double reverse_end(const GeometryParams& g) {
  return reverse_start(g) + (kCabinX - kApproachStartX) / kRiseSpeed;
}

PathPoint elevator_point(const GeometryParams& g, double t) {
  PathPoint p;
  const double R = g.elevator_rise;
  double x = kCabinX, z = 0.0;
  if (t < kApproachEnd) {
    x = kApproachStartX + kRiseSpeed * t;
    p.tangent = Vec3::UnitX();
  } else if (t < kRiseStart) {
  } else if (t < rise_end(g)) {
    z = kRiseSpeed * (t - kRiseStart);
    p.tangent = Vec3::UnitZ();
  } else if (t < reverse_start(g)) {
    z = R;
  } else if (t < reverse_end(g)) {
    z = R;
    x = kCabinX - kRiseSpeed * (t - reverse_start(g));
    p.tangent = -Vec3::UnitX();
  } else {
    z = R;
    x = kApproachStartX;
  }
  p.position = Vec3(x, 0.0, g.sensor_height + z);
  return p;
}

PathPoint path_point(const Scenario& s, double t) {
  t = std::clamp(t, 0.0, s.duration);
  const auto& g = s.geometry;
  switch (s.kind) {
    case TrajectoryKind::kCorridorLoop: {
      const double perimeter = corridor_perimeter(g);
      return corridor_point(g, std::min(perimeter * t / s.duration, perimeter));
    }
    case TrajectoryKind::kFigureEight: {
      const double lap = 2.0 * kVarpi;
      double u = kFigureEightLaps * lap * t / s.duration;
      // Laps restart at the same parameter; the final instant is the end of a lap.
      if (u >= lap) u = std::fmod(u, lap);
      if (t >= s.duration) u = lap;
      return figure_eight_point(g, u);
    }
    case TrajectoryKind::kElevator: return elevator_point(g, t);
  }
  return {};
}

}  // namespace

Transform pose_at(const Scenario& s, double t) { return pose_from(path_point(s, t)); }

Vec3 travel_direction(const Scenario& s, double t) { return path_point(s, t).tangent; }

CabinState cabin_at(const Scenario& s, double t) {
  CabinState c;
  if (s.kind != TrajectoryKind::kElevator) return c;
  const auto& g = s.geometry;
  if (t >= kRiseStart) c.lift = std::min(kRiseSpeed * (t - kRiseStart), g.elevator_rise);
  c.doors_closed = t >= kDoorsCloseAt && t < reverse_start(g) - 1.0;
  return c;
}

double path_length(const Scenario& s) {
  const auto& g = s.geometry;
  switch (s.kind) {
    case TrajectoryKind::kCorridorLoop: return corridor_perimeter(g);
    case TrajectoryKind::kFigureEight: return kFigureEightLaps * 2.0 * kVarpi * g.figure_eight_size;
    case TrajectoryKind::kElevator: {
      // Horizontal travel both ways plus the rise, truncated by the duration.
      double len = 0.0;
      const double T = s.duration;
      len += kRiseSpeed * std::clamp(T, 0.0, kApproachEnd);
      len += kRiseSpeed * std::clamp(T - kRiseStart, 0.0, rise_end(g) - kRiseStart);
      len += kRiseSpeed * std::clamp(T - reverse_start(g), 0.0, reverse_end(g) - reverse_start(g));
      return len;
    }
  }
  return 0.0;
}

double distance_to_corner(const Scenario& s, const Vec3& p) {
  const auto& g = s.geometry;
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& c : {Vec3(0, 0, 0), Vec3(g.corridor_length, 0, 0), Vec3(g.corridor_length, g.corridor_side, 0),
                        Vec3(0, g.corridor_side, 0)}) {
    best = std::min(best, std::hypot(p.x() - c.x(), p.y() - c.y()));
  }
  return best;
}

Trajectory gen_trajectory(const Scenario& s) {
  s.validate();
  Trajectory out;
  const std::size_t n = s.pose_count();
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / s.pose_rate;
    out.push_back({t, pose_at(s, t), std::nullopt});
  }
  return out;
}

}  // namespace rfusion::sim
