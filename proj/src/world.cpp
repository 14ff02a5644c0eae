#include <algorithm>
#include <cmath>
#include <limits>

#include "rfusion/scenario.hpp"

namespace rfusion::sim {

namespace {

constexpr double kMinHit = 1e-9;

// Rectangle on plane `axis = coord`, spanning [a0, a1] x [b0, b1] along the
// remaining axes in increasing order.
Quad make_quad(int axis, double coord, double a0, double a1, double b0, double b1) {
  Quad q;
  q.axis = axis;
  q.coord = coord;
  q.lo[0] = std::min(a0, a1);
  q.hi[0] = std::max(a0, a1);
  q.lo[1] = std::min(b0, b1);
  q.hi[1] = std::max(b0, b1);
  return q;
}

void other_axes(int axis, int& u, int& v) {
  u = axis == 0 ? 1 : 0;
  v = axis == 2 ? 1 : 2;
}

void add_box_faces(std::vector<Quad>& quads, const Aabb& b) {
  for (int axis = 0; axis < 3; ++axis) {
    int u, v;
    other_axes(axis, u, v);
    for (const double c : {b.lo[axis], b.hi[axis]}) {
      quads.push_back(make_quad(axis, c, b.lo[u], b.hi[u], b.lo[v], b.hi[v]));
    }
  }
}

std::optional<double> hit(const Quad& q, const Vec3& o, const Vec3& d, double lift) {
  const int a = q.axis;
  if (d[a] == 0.0) return std::nullopt;
  const double coord = a == 2 ? q.coord + lift : q.coord;
  const double t = (coord - o[a]) / d[a];
  if (!(t > kMinHit)) return std::nullopt;
  int u, v;
  other_axes(a, u, v);
  const double pu = o[u] + t * d[u];
  const double pv = o[v] + t * d[v];
  const double lv = v == 2 ? lift : 0.0;
  const double lu = u == 2 ? lift : 0.0;
  if (pu < q.lo[0] + lu || pu > q.hi[0] + lu || pv < q.lo[1] + lv || pv > q.hi[1] + lv) return std::nullopt;
  return t;
}

World corridor_world(const Scenario& s) {
  const auto& g = s.geometry;
  const double hw = 0.5 * g.corridor_width;
  const double L = g.corridor_length;
  const double S = g.corridor_side;
  const double H = g.corridor_height;
  World w;
  const Aabb outer{Vec3(-hw, -hw, 0.0), Vec3(L + hw, S + hw, H)};
  w.rooms.push_back(outer);
  w.quads.push_back(make_quad(2, 0.0, -hw, L + hw, -hw, S + hw));
  w.quads.push_back(make_quad(2, H, -hw, L + hw, -hw, S + hw));
  w.quads.push_back(make_quad(0, -hw, -hw, S + hw, 0.0, H));
  w.quads.push_back(make_quad(0, L + hw, -hw, S + hw, 0.0, H));
  w.quads.push_back(make_quad(1, -hw, -hw, L + hw, 0.0, H));
  w.quads.push_back(make_quad(1, S + hw, -hw, L + hw, 0.0, H));
  w.add_solid(Aabb{Vec3(hw, hw, 0.0), Vec3(L - hw, S - hw, H)}, false);

  // Feature-rich zones: clutter along the walls within a few meters of each
  // corner; the straight corridor sections between them stay bare.
  const Vec3 corners[4] = {{0, 0, 0}, {L, 0, 0}, {L, S, 0}, {0, S, 0}};
  for (const Vec3& c : corners) {
    const double ox = c.x() > 0.5 * L ? 1.0 : -1.0;  // outward along x
    const double oy = c.y() > 0.5 * S ? 1.0 : -1.0;  // outward along y
    auto box = [&](double x0, double x1, double y0, double y1, double height) {
      // Local offsets: x along -ox from the corner, y along -oy.
      const double ax = c.x() - ox * x0, bx = c.x() - ox * x1;
      const double ay = c.y() - oy * y0, by = c.y() - oy * y1;
      w.add_solid(Aabb{Vec3(std::min(ax, bx), std::min(ay, by), 0.0), Vec3(std::max(ax, bx), std::max(ay, by), height)},
                true);
    };
    box(-hw, -hw + 0.7, -hw, -hw + 0.7, 1.2);           // outer corner block
    box(2.0, 2.6, -hw, -hw + 0.5, 0.9);                 // x arm, outer wall
    box(3.4, 3.8, hw - 0.4, hw, 1.5);                   // x arm, inner wall
    box(-hw, -hw + 0.5, 1.6, 2.2, 0.7);                 // y arm, outer wall
    box(hw - 0.4, hw, 3.0, 3.5, 1.1);                   // y arm, inner wall
    // Full-height partitions that cut off the long views down each arm.
    box(4.0, 4.3, -hw, -hw + 0.9, H);
    box(5.2, 5.5, hw - 0.9, hw, H);
    box(-hw, -hw + 0.9, 4.0, 4.3, H);
    box(hw - 0.9, hw, 5.2, 5.5, H);
  }
  return w;
}

World figure_eight_world(const Scenario& s) {
  const auto& g = s.geometry;
  const double a = g.figure_eight_size;
  const double H = g.corridor_height;
  World w;
  const Aabb hall{Vec3(-a - 3.0, -5.0, 0.0), Vec3(a + 3.0, 5.0, H)};
  w.add_room(hall);
  const double half = 0.4;
  const Vec3 centers[] = {{0.0, 4.3, 0.0},      {0.0, -4.3, 0.0},      {0.5 * a, 4.2, 0.0}, {-0.5 * a, -4.2, 0.0},
                          {-0.5 * a, 4.2, 0.0}, {0.5 * a, -4.2, 0.0},  {a + 2.0, 0.0, 0.0}, {-a - 2.0, 1.0, 0.0}};
  int i = 0;
  for (const Vec3& c : centers) {
    const double height = 0.8 + 0.2 * (i++ % 4);
    w.add_solid(Aabb{Vec3(c.x() - half, c.y() - half, 0.0), Vec3(c.x() + half, c.y() + half, height)}, true);
  }
  return w;
}

World elevator_world(const Scenario& s) {
  const auto& g = s.geometry;
  const double R = g.elevator_rise;
  const double H = g.corridor_height;
  const double cabin_h = std::min(2.5, H);
  World w;
  for (const double base : {0.0, R}) {
    const Aabb hall{Vec3(-12.0, -2.0, base), Vec3(0.0, 2.0, base + H)};
    w.rooms.push_back(hall);
    w.rooms.push_back(Aabb{Vec3(-0.5, -1.0, base), Vec3(0.5, 1.0, base + cabin_h)});  // doorway
    w.quads.push_back(make_quad(2, base, -12.0, 0.0, -2.0, 2.0));
    w.quads.push_back(make_quad(2, base + H, -12.0, 0.0, -2.0, 2.0));
    w.quads.push_back(make_quad(1, -2.0, -12.0, 0.0, base, base + H));
    w.quads.push_back(make_quad(1, 2.0, -12.0, 0.0, base, base + H));
    w.quads.push_back(make_quad(0, -12.0, -2.0, 2.0, base, base + H));
    // End wall with the elevator doorway.
    w.quads.push_back(make_quad(0, 0.0, -2.0, -1.0, base, base + H));
    w.quads.push_back(make_quad(0, 0.0, 1.0, 2.0, base, base + H));
    w.quads.push_back(make_quad(0, 0.0, -1.0, 1.0, base + cabin_h, base + H));
    for (const double x : {-8.0, -4.0}) {
      w.add_solid(Aabb{Vec3(x, 1.4, base), Vec3(x + 0.6, 2.0, base + 1.0)}, true);
      w.add_solid(Aabb{Vec3(x + 1.5, -2.0, base), Vec3(x + 2.0, -1.5, base + 0.8)}, true);
    }
  }
  // Shaft.
  const Aabb shaft{Vec3(0.0, -1.0, 0.0), Vec3(2.0, 1.0, R + H)};
  w.rooms.push_back(shaft);
  w.quads.push_back(make_quad(1, -1.0, 0.0, 2.0, 0.0, R + H));
  w.quads.push_back(make_quad(1, 1.0, 0.0, 2.0, 0.0, R + H));
  w.quads.push_back(make_quad(0, 2.0, -1.0, 1.0, 0.0, R + H));
  w.quads.push_back(make_quad(2, 0.0, 0.0, 2.0, -1.0, 1.0));
  w.quads.push_back(make_quad(2, R + H, 0.0, 2.0, -1.0, 1.0));
  w.quads.push_back(make_quad(0, 0.0, -1.0, 1.0, cabin_h, R));
  // Cabin, expressed at lift 0 and shifted by the current lift when cast.
  w.cabin_quads.push_back(make_quad(2, 0.0, 0.0, 2.0, -1.0, 1.0));
  w.cabin_quads.push_back(make_quad(2, cabin_h, 0.0, 2.0, -1.0, 1.0));
  w.cabin_quads.push_back(make_quad(1, -1.0, 0.0, 2.0, 0.0, cabin_h));
  w.cabin_quads.push_back(make_quad(1, 1.0, 0.0, 2.0, 0.0, cabin_h));
  w.cabin_quads.push_back(make_quad(0, 2.0, -1.0, 1.0, 0.0, cabin_h));
  w.cabin_door = make_quad(0, 0.0, -1.0, 1.0, 0.0, cabin_h);
  return w;
}

}  // namespace

void World::add_room(const Aabb& room) {
  rooms.push_back(room);
  add_box_faces(quads, room);
}

void World::add_solid(const Aabb& box, bool feature) {
  solids.push_back(box);
  if (feature) feature_boxes.push_back(box);
  add_box_faces(quads, box);
}

std::optional<double> World::cast(const Vec3& origin, const Vec3& dir, double max_range,
                                  const CabinState& cabin) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : quads) {
    if (const auto t = hit(q, origin, dir, 0.0); t && *t < best) best = *t;
  }
  for (const auto& q : cabin_quads) {
    if (const auto t = hit(q, origin, dir, cabin.lift); t && *t < best) best = *t;
  }
  if (cabin_door && cabin.doors_closed) {
    if (const auto t = hit(*cabin_door, origin, dir, cabin.lift); t && *t < best) best = *t;
  }
  if (best > max_range) return std::nullopt;
  return best;
}

bool World::is_free(const Vec3& p) const {
  const bool in_room = std::any_of(rooms.begin(), rooms.end(), [&](const Aabb& r) { return r.strictly_contains(p); });
  const bool in_solid = std::any_of(solids.begin(), solids.end(), [&](const Aabb& b) { return b.contains(p); });
  return in_room && !in_solid;
}

double World::distance_to_features(const Vec3& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : feature_boxes) {
    const Vec3 d = (b.lo - p).cwiseMax(p - b.hi).cwiseMax(Vec3::Zero());
    best = std::min(best, d.norm());
  }
  return best;
}

World build_world(const Scenario& s) {
  s.validate();
  switch (s.kind) {
    case TrajectoryKind::kCorridorLoop: return corridor_world(s);
    case TrajectoryKind::kElevator: return elevator_world(s);
    case TrajectoryKind::kFigureEight: return figure_eight_world(s);
  }
  return {};
}

}  // namespace rfusion::sim
