#pragma once

// Point-to-point ICP between consecutive scans and the per-scan quantities the
// degeneracy detector consumes: the mean squared alignment residual and the
// structured-point (feature) count.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "rfusion/se3.hpp"

namespace rfusion {

struct ScanFrame {
  double timestamp = 0.0;   // seconds
  std::vector<Vec3> points;  // meters, sensor frame
};

// Written out so every call site rounds identically; the kd-tree and the
// exhaustive reference must agree on ties bit for bit.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

struct Neighbor {
  std::size_t index = 0;
  double sq_dist = std::numeric_limits<double>::infinity();
};

inline bool closer(const Neighbor& a, const Neighbor& b) {
  return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
}

// Exact nearest-neighbor index. Ties resolve to the lowest point index.
class KdTree {
 public:
  // Throws std::invalid_argument for an empty point set.
  explicit KdTree(std::vector<Vec3> points);
  explicit KdTree(const ScanFrame& scan) : KdTree(scan.points) {}

  Neighbor nearest(const Vec3& query) const;
  // Up to k neighbors, sorted by (distance, index).
  std::vector<Neighbor> k_nearest(const Vec3& query, std::size_t k) const;

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

 private:
  struct Node {
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    std::uint32_t begin = 0, end = 0;  // leaf range into order_
    std::uint32_t left = 0, right = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  void search_nearest(std::uint32_t node, const Vec3& q, Neighbor& best) const;
  void search_k(std::uint32_t node, const Vec3& q, std::size_t k, std::vector<Neighbor>& heap) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

struct Correspondence {
  std::size_t source = 0;
  std::size_t target = 0;
  double sq_dist = 0.0;  // m^2
};

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;  // ascending source index
  double gate = 0.0;                  // meters
};

// One pair per source point whose nearest target lies within `gate`.
// Throws std::invalid_argument when gate <= 0. OpenMP-parallel over points.
CorrespondenceSet find_correspondences(std::span<const Vec3> source, const KdTree& index, double gate);
CorrespondenceSet find_correspondences(const ScanFrame& source, const KdTree& index, double gate);
// Single-threaded reference with identical output.
CorrespondenceSet find_correspondences_serial(std::span<const Vec3> source, const KdTree& index,
                                              double gate);

struct FeatureParams {
  std::size_t k = 10;          // neighborhood size, including the point itself
  double aniso_ratio = 25.0;   // lambda_max >= ratio * lambda_min
  double radius_cap = 0.5;     // meters; neighborhoods reaching further are not counted
};

// Points whose k-NN covariance is edge- or plane-like. Returns 0 when the scan
// has fewer than k points.
std::size_t extract_feature_count(const ScanFrame& scan, const FeatureParams& params = {});
std::size_t extract_feature_count_serial(const ScanFrame& scan, const FeatureParams& params = {});

struct IcpParams {
  double gate = 1.0;           // meters
  int max_iterations = 30;
  double tolerance = 1e-6;     // twist-update norm
  Transform initial_guess;     // maps source into target
  FeatureParams features;
  std::size_t normal_k = 30;   // neighbors for target normals in the Hessian diagnostic
  bool range_weighting = true;    // weight diagnostic rows by 1 / range^2
  double min_weight_range = 1.0;  // meters; range floor for those weights
  bool compute_hessian = true;    // off leaves hessian_min_eig at 0
};

struct MatchReport {
  double eps_align = std::numeric_limits<double>::infinity();  // m^2
  std::size_t n_feat = 0;
  std::size_t matched = 0;  // correspondences in the final residual
  bool converged = false;
  int iterations = 0;
  double hessian_min_eig = 0.0;
};

struct IcpResult {
  Transform transform;  // source -> target
  MatchReport report;
};

// Throws std::invalid_argument when either scan has fewer than 10 points.
IcpResult icp_align(const ScanFrame& source, const ScanFrame& target, const IcpParams& params = {});

// Smallest eigenvalue of the point-to-plane information matrix of `pairs` at
// `transform`, optionally weighting each row by 1 / max(range, floor)^2 with
// range measured in the target frame. Normals come from k-NN PCA on the target.
double alignment_min_eigenvalue(std::span<const Vec3> source, const KdTree& target,
                                const CorrespondenceSet& pairs, const Transform& transform,
                                const IcpParams& params);

}  // namespace rfusion
