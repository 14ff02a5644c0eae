#pragma once

// Robust SE(3) alignment of the VIO frame to the LIO frame from paired poses.

#include <vector>

#include "json.hpp"
#include "rfusion/pose.hpp"
#include "rfusion/se3.hpp"

namespace rfusion {

struct PosePair {
  double t = 0.0;
  Transform lio;
  Transform vio;
  Covariance6 sigma = Covariance6::Identity();
};

// diag(0.01 m^2 x3, (0.5 deg)^2 x3), used when neither pose carries a covariance.
Covariance6 default_pair_covariance();

// Greedy nearest-timestamp association: candidate pairs within tolerance are
// taken in order of increasing |dt| (ties by index), each pose used once.
// Result is ordered by LIO timestamp; its covariance is the sum of whichever
// pose covariances exist, else default_pair_covariance().
std::vector<PosePair> pair_poses(const Trajectory& lio, const Trajectory& vio, double tolerance);

// rho(s) = c^2/2 ln(1 + s/c^2), s a squared Mahalanobis residual.
double cauchy_rho(double s, double c);
// d rho / d s = 1 / (2 (1 + s/c^2)).
double cauchy_weight(double s, double c);

struct PairResidual {
  Twist twist;      // log(lio (T vio)^-1)
  double sq = 0.0;  // twist^T sigma^-1 twist
  bool near_pi = false;
};

PairResidual residual(const Transform& t, const PosePair& pair);
// d residual / d delta for the left perturbation T <- exp(delta) T.
Mat6 residual_jacobian(const PairResidual& r);

struct AlignOptions {
  double cauchy_c = 1.0;
  std::size_t k_min = 10;
  int max_iters = 50;
  double update_tol = 1e-8;
  double initial_damping = 1e-6;
  // Squared Mahalanobis cutoff for inlier counting (chi-square, 6 dof, 99%).
  double inlier_threshold = 16.812;
};

struct AlignmentResult {
  Transform t_align;  // maps VIO-frame poses into the LIO frame
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  double inlier_fraction = 0.0;
};

double alignment_cost(const Transform& t, const std::vector<PosePair>& window, double c);

// Iteratively reweighted Gauss-Newton with Levenberg damping, initialized from
// the median-timestamp pair. Throws std::invalid_argument for fewer than
// k_min pairs or non-increasing timestamps.
AlignmentResult solve_alignment(const std::vector<PosePair>& window, const AlignOptions& options = {});
AlignmentResult solve_alignment_from(const Transform& initial, const std::vector<PosePair>& window,
                                     const AlignOptions& options = {});

nlohmann::ordered_json alignment_json(const AlignmentResult& r);

}  // namespace rfusion
