#include "rfusion/scan_match.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rfusion/errors.hpp"

namespace rfusion {

namespace {

constexpr std::size_t kNoMatch = std::numeric_limits<std::size_t>::max();

void check_gate(double gate) {
  if (!(gate > 0.0)) throw std::invalid_argument("correspondence gate must be positive");
}

CorrespondenceSet compact(std::span<const Neighbor> nearest, double gate) {
  const double gate_sq = gate * gate;
  CorrespondenceSet set;
  set.gate = gate;
  for (std::size_t i = 0; i < nearest.size(); ++i) {
    if (nearest[i].index != kNoMatch && nearest[i].sq_dist <= gate_sq) {
      set.pairs.push_back({i, nearest[i].index, nearest[i].sq_dist});
    }
  }
  return set;
}

Eigen::Matrix3d neighborhood_covariance(const std::vector<Vec3>& points, std::span<const Neighbor> nbrs) {
  Vec3 mean = Vec3::Zero();
  for (const auto& n : nbrs) mean += points[n.index];
  mean /= static_cast<double>(nbrs.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& n : nbrs) {
    const Vec3 d = points[n.index] - mean;
    cov += d * d.transpose();
  }
  return cov / static_cast<double>(nbrs.size());
}

bool is_structured(const KdTree& tree, const Vec3& p, const FeatureParams& params) {
  const auto nbrs = tree.k_nearest(p, params.k);
  if (nbrs.size() < params.k) return false;
  if (nbrs.back().sq_dist > params.radius_cap * params.radius_cap) return false;
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(neighborhood_covariance(tree.points(), nbrs),
                                                Eigen::EigenvaluesOnly);
  const double lmin = std::max(eig.eigenvalues()[0], 0.0);
  const double lmax = eig.eigenvalues()[2];
  return lmax > 0.0 && lmax >= params.aniso_ratio * lmin;
}

std::vector<Vec3> transformed(std::span<const Vec3> points, const Transform& t) {
  std::vector<Vec3> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = t * points[i];
  return out;
}

}  // namespace

CorrespondenceSet find_correspondences_serial(std::span<const Vec3> source, const KdTree& index,
                                              double gate) {
  check_gate(gate);
  std::vector<Neighbor> nearest(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) nearest[i] = index.nearest(source[i]);
  return compact(nearest, gate);
}

CorrespondenceSet find_correspondences(std::span<const Vec3> source, const KdTree& index, double gate) {
  check_gate(gate);
  std::vector<Neighbor> nearest(source.size());
  const auto n = static_cast<std::int64_t>(source.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) nearest[i] = index.nearest(source[i]);
  return compact(nearest, gate);
}

CorrespondenceSet find_correspondences(const ScanFrame& source, const KdTree& index, double gate) {
  return find_correspondences(std::span<const Vec3>(source.points), index, gate);
}

std::size_t extract_feature_count_serial(const ScanFrame& scan, const FeatureParams& params) {
  if (scan.points.empty()) throw std::invalid_argument("feature extraction on an empty scan");
  if (scan.points.size() < params.k || params.k < 3) return 0;
  const KdTree tree(scan);
  std::size_t count = 0;
  for (const auto& p : scan.points) count += is_structured(tree, p, params) ? 1 : 0;
  return count;
}

std::size_t extract_feature_count(const ScanFrame& scan, const FeatureParams& params) {
  if (scan.points.empty()) throw std::invalid_argument("feature extraction on an empty scan");
  if (scan.points.size() < params.k || params.k < 3) return 0;
  const KdTree tree(scan);
  const auto n = static_cast<std::int64_t>(scan.points.size());
  std::int64_t count = 0;
#pragma omp parallel for schedule(static) reduction(+ : count)
  for (std::int64_t i = 0; i < n; ++i) count += is_structured(tree, scan.points[i], params) ? 1 : 0;
  return static_cast<std::size_t>(count);
}

double alignment_min_eigenvalue(std::span<const Vec3> source, const KdTree& target,
                                const CorrespondenceSet& pairs, const Transform& transform,
                                const IcpParams& params) {
  Mat6 info = Mat6::Zero();
  const std::size_t k = std::min(params.normal_k, target.size());
  if (k < 3) return 0.0;
  for (const auto& c : pairs.pairs) {
    const Vec3& q = target.points()[c.target];
    const auto nbrs = target.k_nearest(q, k);
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(neighborhood_covariance(target.points(), nbrs));
    const Vec3 normal = eig.eigenvectors().col(0);
    const Vec3 p = transform * source[c.source];
    Vec6 row;
    row << normal, p.cross(normal);
    double w = 1.0;
    if (params.range_weighting) {
      const double r = std::max(q.norm(), params.min_weight_range);
      w = 1.0 / (r * r);
    }
    info.noalias() += w * row * row.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Mat6> eig(info, Eigen::EigenvaluesOnly);
  return std::max(eig.eigenvalues()[0], 0.0);
}

IcpResult icp_align(const ScanFrame& source, const ScanFrame& target, const IcpParams& params) {
  if (source.points.size() < 10 || target.points.size() < 10) {
    throw std::invalid_argument("icp_align needs at least 10 points per scan");
  }
  const KdTree index(target);
  IcpResult result;
  result.transform = params.initial_guess;
  result.report.n_feat = extract_feature_count(source, params.features);

  std::vector<Vec3> src_matched;
  std::vector<Vec3> tgt_matched;
  bool failed = false;
  for (int it = 1; it <= params.max_iterations; ++it) {
    result.report.iterations = it;
    const auto moved = transformed(source.points, result.transform);
    const auto set = find_correspondences(moved, index, params.gate);
    if (set.pairs.size() < 3) {
      failed = true;
      break;
    }
    // Every pair already coincides; the current transform is exact.
    if (std::all_of(set.pairs.begin(), set.pairs.end(),
                    [](const Correspondence& c) { return c.sq_dist == 0.0; })) {
      result.report.converged = true;
      break;
    }
    src_matched.clear();
    tgt_matched.clear();
    for (const auto& c : set.pairs) {
      src_matched.push_back(source.points[c.source]);
      tgt_matched.push_back(target.points[c.target]);
    }
    Transform next;
    try {
      next = umeyama_align(src_matched, tgt_matched);
    } catch (const DegenerateGeometry&) {
      failed = true;
      break;
    }
    const double step = log_se3(next * result.transform.inverse()).vector().norm();
    result.transform = next;
    if (step < params.tolerance) {
      result.report.converged = true;
      break;
    }
  }

  if (failed) {
    result.report.converged = false;
    result.report.eps_align = std::numeric_limits<double>::infinity();
    result.report.matched = 0;
    result.report.hessian_min_eig = 0.0;
    return result;
  }

  const auto moved = transformed(source.points, result.transform);
  const auto final_set = find_correspondences(moved, index, params.gate);
  result.report.matched = final_set.pairs.size();
  if (final_set.pairs.size() < 3) {
    result.report.converged = false;
    result.report.eps_align = std::numeric_limits<double>::infinity();
    return result;
  }
  double sum = 0.0;
  for (const auto& c : final_set.pairs) sum += c.sq_dist;
  result.report.eps_align = sum / static_cast<double>(final_set.pairs.size());
  if (params.compute_hessian) {
    result.report.hessian_min_eig =
        alignment_min_eigenvalue(source.points, index, final_set, result.transform, params);
  }
  return result;
}

}  // namespace rfusion
