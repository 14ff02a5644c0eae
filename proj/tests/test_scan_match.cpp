#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "rfusion/rng.hpp"
#include "rfusion/scan_match.hpp"
#include "test_util.hpp"

using namespace rfusion;
using rfusion::testing::random_transform;

namespace {

Neighbor exhaustive_nearest(const std::vector<Vec3>& pts, const Vec3& q) {
  Neighbor best{pts.size(), std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = squared_distance(q, pts[i]);
    if (d < best.sq_dist) best = {i, d};  // strict: first (lowest) index wins ties
  }
  return best;
}

std::vector<Neighbor> exhaustive_k(const std::vector<Vec3>& pts, const Vec3& q, std::size_t k) {
  std::vector<Neighbor> all;
  for (std::size_t i = 0; i < pts.size(); ++i) all.push_back({i, squared_distance(q, pts[i])});
  std::sort(all.begin(), all.end(), closer);
  all.resize(std::min(k, all.size()));
  return all;
}

std::vector<Vec3> random_cloud(Rng& rng, std::size_t n, double half) {
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back(rng.uniform3(-half, half));
  return pts;
}

ScanFrame wall_scan(Rng& rng, double sigma) {
  // Two infinite parallel walls y = +-1.5, sampled on a grid that moves with the sensor.
  ScanFrame scan;
  for (int i = -40; i <= 40; ++i) {
    for (int j = 0; j < 10; ++j) {
      const double x = 0.25 * i;
      const double z = 0.3 * j;
      scan.points.push_back(Vec3(x, 1.5, z) + rng.normal3(sigma));
      scan.points.push_back(Vec3(x, -1.5, z) + rng.normal3(sigma));
    }
  }
  return scan;
}

}  // namespace

TEST_CASE("kd-tree single point") {
  const KdTree tree(std::vector<Vec3>{Vec3(1, 2, 3)});
  Rng rng(1);
  for (int i = 0; i < 20; ++i) CHECK(tree.nearest(rng.uniform3(-10, 10)).index == 0);
  CHECK_THROWS_AS(KdTree(std::vector<Vec3>{}), std::invalid_argument);
}

TEST_CASE("kd-tree matches exhaustive search") {
  Rng rng(2);
  const auto pts = random_cloud(rng, 1000, 5.0);
  const KdTree tree(pts);
  for (int i = 0; i < 100; ++i) {
    const Vec3 q = rng.uniform3(-6, 6);
    const Neighbor a = tree.nearest(q);
    const Neighbor b = exhaustive_nearest(pts, q);
    CHECK(a.index == b.index);
    CHECK(a.sq_dist == b.sq_dist);
    const auto ka = tree.k_nearest(q, 10);
    const auto kb = exhaustive_k(pts, q, 10);
    REQUIRE(ka.size() == kb.size());
    for (std::size_t j = 0; j < ka.size(); ++j) CHECK(ka[j].index == kb[j].index);
  }
}

TEST_CASE("kd-tree tie rule: lowest index wins") {
  std::vector<Vec3> pts(50, Vec3(1, 1, 1));
  pts.push_back(Vec3(5, 5, 5));
  std::reverse(pts.begin(), pts.end());  // duplicates at indices 1..50
  const KdTree dup(pts);
  CHECK(dup.nearest(Vec3(0, 0, 0)).index == 1);

  // Lattice queried at cell centers: eight equidistant candidates each time.
  std::vector<Vec3> grid;
  for (int x = 0; x < 8; ++x)
    for (int y = 0; y < 8; ++y)
      for (int z = 0; z < 8; ++z) grid.emplace_back(x, y, z);
  Rng rng(3);
  std::shuffle(grid.begin(), grid.end(), std::mt19937_64(4));
  const KdTree tree(grid);
  for (int i = 0; i < 200; ++i) {
    const Vec3 q(std::floor(rng.uniform(0, 7)) + 0.5, std::floor(rng.uniform(0, 7)) + 0.5,
                 std::floor(rng.uniform(0, 7)) + 0.5);
    CHECK(tree.nearest(q).index == exhaustive_nearest(grid, q).index);
    const auto ka = tree.k_nearest(q, 9);
    const auto kb = exhaustive_k(grid, q, 9);
    for (std::size_t j = 0; j < ka.size(); ++j) CHECK(ka[j].index == kb[j].index);
  }
}

TEST_CASE("find_correspondences") {
  Rng rng(5);
  const auto pts = random_cloud(rng, 400, 5.0);
  const KdTree tree(pts);

  SUBCASE("identical clouds pair at zero distance") {
    const auto set = find_correspondences(pts, tree, 0.01);
    REQUIRE(set.pairs.size() == pts.size());
    for (const auto& c : set.pairs) {
      CHECK(c.source == c.target);
      CHECK(c.sq_dist == 0.0);
    }
  }
  SUBCASE("shift of twice the gate empties the set") {
    std::vector<Vec3> grid, shifted;
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j) grid.emplace_back(10.0 * i, 10.0 * j, 0.0);
    for (const auto& p : grid) shifted.push_back(p + Vec3(2.0, 0, 0));
    const KdTree g(grid);
    CHECK(find_correspondences(shifted, g, 1.0).pairs.empty());
  }
  SUBCASE("partial overlap matches exhaustive count; OpenMP equals serial") {
    std::vector<Vec3> other = random_cloud(rng, 400, 5.0);
    for (auto& p : other) p += Vec3(4.0, 0, 0);
    const auto par = find_correspondences(other, tree, 0.8);
    const auto ser = find_correspondences_serial(other, tree, 0.8);
    std::size_t expected = 0;
    for (const auto& p : other) expected += exhaustive_nearest(pts, p).sq_dist <= 0.64 ? 1 : 0;
    CHECK(par.pairs.size() == expected);
    REQUIRE(par.pairs.size() == ser.pairs.size());
    for (std::size_t i = 0; i < par.pairs.size(); ++i) {
      CHECK(par.pairs[i].source == ser.pairs[i].source);
      CHECK(par.pairs[i].target == ser.pairs[i].target);
      CHECK(par.pairs[i].sq_dist <= 0.64);
    }
  }
  CHECK_THROWS_AS(find_correspondences(pts, tree, 0.0), std::invalid_argument);
}

TEST_CASE("icp on identical scans") {
  Rng rng(6);
  ScanFrame scan{0.0, random_cloud(rng, 300, 5.0)};
  const auto result = icp_align(scan, scan);
  CHECK(result.report.converged);
  CHECK(result.report.eps_align == 0.0);
  CHECK(rfusion::testing::transform_distance(result.transform, Transform::identity()) < 1e-12);
}

TEST_CASE("icp recovers a noiseless translation") {
  Rng rng(7);
  ScanFrame source{0.0, random_cloud(rng, 500, 5.0)};
  ScanFrame target{0.1, {}};
  const Vec3 shift(0.1, 0.0, 0.0);
  for (const auto& p : source.points) target.points.push_back(p + shift);
  const auto result = icp_align(source, target);
  CHECK(result.report.converged);
  CHECK((result.transform.translation() - shift).norm() < 1e-6);
  CHECK(rotation_angle(result.transform.rotation()) < 1e-6);
  CHECK(result.report.eps_align < 1e-10);
  CHECK(result.report.matched == source.points.size());
}

TEST_CASE("icp recovers a small rigid motion and eps is invariant under a common transform") {
  Rng rng(8);
  ScanFrame source{0.0, random_cloud(rng, 600, 6.0)};
  const Transform motion = exp_se3(Twist(Vec3(0.08, -0.05, 0.02), Vec3(0.01, -0.02, 0.03)));
  ScanFrame target{0.1, {}};
  for (const auto& p : source.points) target.points.push_back(motion * p + rng.normal3(0.005));
  const auto base = icp_align(source, target);
  CHECK(base.report.converged);
  CHECK((base.transform.translation() - motion.translation()).norm() < 0.01);

  const Transform g = random_transform(rng);
  ScanFrame s2 = source, t2 = target;
  for (auto& p : s2.points) p = g * p;
  for (auto& p : t2.points) p = g * p;
  IcpParams params;
  params.initial_guess = g * Transform::identity() * g.inverse();
  const auto moved = icp_align(s2, t2, params);
  CHECK(std::abs(moved.report.eps_align - base.report.eps_align) < 1e-9);
  CHECK(moved.report.matched == base.report.matched);
}

TEST_CASE("icp between parallel walls leaves the corridor axis unobserved") {
  Rng rng(9);
  const ScanFrame a = wall_scan(rng, 0.0);
  const ScanFrame b = wall_scan(rng, 0.0);
  // The sensor advanced 0.3 m along x but the walls look identical.
  const auto result = icp_align(b, a);
  CHECK(result.report.converged);
  CHECK(result.report.eps_align < 1e-6);
  CHECK(std::abs(result.transform.translation().x()) < 0.3 - 0.1);
  CHECK(result.report.hessian_min_eig < 1e-6);

  // A cross wall restores the constraint.
  ScanFrame boxed = a;
  for (int i = -10; i <= 10; ++i)
    for (int j = 0; j < 10; ++j) boxed.points.emplace_back(3.0, 0.15 * i, 0.3 * j);
  const auto constrained = icp_align(boxed, boxed);
  CHECK(constrained.report.hessian_min_eig > 1e-3);
}

TEST_CASE("icp reports failure when nothing matches") {
  Rng rng(10);
  ScanFrame a{0.0, random_cloud(rng, 50, 1.0)};
  ScanFrame b = a;
  for (auto& p : b.points) p += Vec3(100, 0, 0);
  const auto r = icp_align(a, b);
  CHECK_FALSE(r.report.converged);
  CHECK(std::isinf(r.report.eps_align));
  ScanFrame tiny{0.0, random_cloud(rng, 5, 1.0)};
  CHECK_THROWS_AS(icp_align(tiny, a), std::invalid_argument);
}

TEST_CASE("icp report is deterministic") {
  Rng rng(11);
  ScanFrame a{0.0, random_cloud(rng, 400, 5.0)};
  ScanFrame b = a;
  for (auto& p : b.points) p = exp_se3(Twist(Vec3(0.05, 0.02, 0), Vec3(0, 0, 0.01))) * p + rng.normal3(0.01);
  const auto r1 = icp_align(a, b);
  const auto r2 = icp_align(a, b);
  CHECK(r1.report.eps_align == r2.report.eps_align);
  CHECK(r1.report.hessian_min_eig == r2.report.hessian_min_eig);
  CHECK(r1.report.iterations == r2.report.iterations);
  CHECK(r1.report.n_feat == r2.report.n_feat);
  CHECK(r1.transform.matrix() == r2.transform.matrix());
}

TEST_CASE("feature count: plane patch is fully structured") {
  ScanFrame plane;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) plane.points.emplace_back(0.1 * i, 0.1 * j, 0.0);
  CHECK(extract_feature_count(plane) == plane.points.size());
  CHECK(extract_feature_count_serial(plane) == plane.points.size());
}

TEST_CASE("feature count: isotropic blob is near zero and matches the eigenvalue oracle") {
  Rng rng(12);
  ScanFrame blob;
  for (int i = 0; i < 2000; ++i) blob.points.push_back(rng.normal3(0.2));
  FeatureParams params;
  const std::size_t count = extract_feature_count(blob, params);

  std::size_t oracle = 0;
  for (const auto& p : blob.points) {
    const auto nbrs = exhaustive_k(blob.points, p, params.k);
    if (nbrs.back().sq_dist > params.radius_cap * params.radius_cap) continue;
    Eigen::MatrixXd m(3, nbrs.size());
    for (std::size_t j = 0; j < nbrs.size(); ++j) m.col(j) = blob.points[nbrs[j].index];
    const Eigen::MatrixXd centered = m.colwise() - m.rowwise().mean();
    const Mat3 cov = centered * centered.transpose() / static_cast<double>(nbrs.size());
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    if (eig.eigenvalues()[2] >= params.aniso_ratio * std::max(0.0, eig.eigenvalues()[0])) ++oracle;
  }
  CHECK(count == oracle);
  CHECK(count < blob.points.size() / 20);
  CHECK(extract_feature_count_serial(blob, params) == count);
}

TEST_CASE("feature count edge cases") {
  ScanFrame small{0.0, {Vec3(0, 0, 0), Vec3(1, 0, 0)}};
  CHECK(extract_feature_count(small) == 0);
  CHECK_THROWS_AS(extract_feature_count(ScanFrame{}), std::invalid_argument);
}
