#include "rfusion/frame_align.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rfusion/associate.hpp"
#include "rfusion/errors.hpp"
#include "rfusion/io.hpp"

namespace rfusion {

namespace {

constexpr double kMaxDamping = 1e12;
constexpr double kMinDamping = 1e-12;

Mat6 information(const Covariance6& sigma) {
  Eigen::LLT<Mat6> llt(0.5 * (sigma + sigma.transpose()));
  if (llt.info() != Eigen::Success) throw InvalidCovariance("pair covariance is not positive definite");
  return llt.solve(Mat6::Identity());
}

}  // namespace

Covariance6 default_pair_covariance() {
  const double rot = 0.5 * std::numbers::pi / 180.0;
  Covariance6 c = Covariance6::Zero();
  c.diagonal() << 0.01, 0.01, 0.01, rot * rot, rot * rot, rot * rot;
  return c;
}

std::vector<PosePair> pair_poses(const Trajectory& lio, const Trajectory& vio, double tolerance) {
  std::vector<double> ta, tb;
  for (const auto& p : lio) ta.push_back(p.t);
  for (const auto& p : vio) tb.push_back(p.t);
  const auto chosen = associate_stamps(ta, tb, tolerance);
  std::vector<PosePair> out;
  out.reserve(chosen.size());
  for (const auto& [i, j] : chosen) {
    PosePair p;
    p.t = lio[i].t;
    p.lio = lio[i].pose;
    p.vio = vio[j].pose;
    if (lio[i].covariance || vio[j].covariance) {
      p.sigma = lio[i].covariance.value_or(Covariance6::Zero()) + vio[j].covariance.value_or(Covariance6::Zero());
    } else {
      p.sigma = default_pair_covariance();
    }
    out.push_back(p);
  }
  return out;
}

double cauchy_rho(double s, double c) {
  const double c2 = c * c;
  return 0.5 * c2 * std::log1p(s / c2);
}

double cauchy_weight(double s, double c) { return 0.5 / (1.0 + s / (c * c)); }

PairResidual residual(const Transform& t, const PosePair& pair) {
  PairResidual r;
  LogQuality q = LogQuality::kRegular;
  r.twist = log_se3(pair.lio * (t * pair.vio).inverse(), &q);
  r.near_pi = q == LogQuality::kNearPi;
  r.sq = mahalanobis_sq(r.twist, pair.sigma);
  return r;
}

Mat6 residual_jacobian(const PairResidual& r) { return -se3_right_jacobian_inverse(r.twist); }

double alignment_cost(const Transform& t, const std::vector<PosePair>& window, double c) {
  double cost = 0.0;
  for (const auto& p : window) {
    const PairResidual r = residual(t, p);
    if (!r.near_pi) cost += cauchy_rho(r.sq, c);
  }
  return cost;
}

AlignmentResult solve_alignment(const std::vector<PosePair>& window, const AlignOptions& options) {
  if (window.size() < std::max<std::size_t>(options.k_min, 1)) {
    throw std::invalid_argument("alignment window has " + std::to_string(window.size()) + " pairs, need " +
                                std::to_string(options.k_min));
  }
  const PosePair& mid = window[(window.size() - 1) / 2];
  return solve_alignment_from(mid.lio * mid.vio.inverse(), window, options);
}

AlignmentResult solve_alignment_from(const Transform& initial, const std::vector<PosePair>& window,
                                     const AlignOptions& options) {
  if (window.size() < std::max<std::size_t>(options.k_min, 1)) {
    throw std::invalid_argument("alignment window has " + std::to_string(window.size()) + " pairs, need " +
                                std::to_string(options.k_min));
  }
  if (!(options.cauchy_c > 0.0)) throw std::invalid_argument("cauchy scale must be > 0");
  for (std::size_t k = 1; k < window.size(); ++k) {
    if (!(window[k].t > window[k - 1].t)) throw std::invalid_argument("alignment window timestamps must increase");
  }
  std::vector<Mat6> info;
  info.reserve(window.size());
  for (const auto& p : window) info.push_back(information(p.sigma));

  const double c = options.cauchy_c;
  AlignmentResult res;
  Transform t = initial;
  double cost = alignment_cost(t, window, c);
  double lambda = options.initial_damping;

  for (int iter = 0; iter < options.max_iters; ++iter) {
    res.iterations = iter + 1;
    Mat6 h = Mat6::Zero();
    Mat6 h_full = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    for (std::size_t k = 0; k < window.size(); ++k) {
      const PairResidual r = residual(t, window[k]);
      if (r.near_pi) continue;
      const Mat6 j = residual_jacobian(r);
      const double w = cauchy_weight(r.sq, c);
      const Mat6 jt_info = j.transpose() * info[k];
      const Vec6 gk = jt_info * r.twist.vector();
      h += w * jt_info * j;
      g += w * gk;
      // Second-order term of the robust kernel: rho'' = -2 w^2 / c^2.
      h_full -= (4.0 * w * w / (c * c)) * gk * gk.transpose();
    }
    h_full += h;

    bool accepted = false;
    Vec6 delta = Vec6::Zero();
    // Newton step on the robust cost first; the reweighted step alone
    // converges only linearly once residuals sit in the kernel's tail.
    const Eigen::LDLT<Mat6> newton(h_full + lambda * Mat6::Identity());
    if (newton.info() == Eigen::Success && newton.isPositive()) {
      delta = -newton.solve(g);
      if (delta.allFinite()) {
        const Transform cand = exp_se3(Twist::from_vector(delta)) * t;
        const double cand_cost = alignment_cost(cand, window, c);
        if (cand_cost <= cost) {
          t = cand;
          cost = cand_cost;
          accepted = true;
        }
      }
    }
    while (!accepted && lambda <= kMaxDamping) {
      const Eigen::LDLT<Mat6> ldlt(h + lambda * Mat6::Identity());
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        delta = -ldlt.solve(g);
        if (delta.allFinite()) {
          const Transform cand = exp_se3(Twist::from_vector(delta)) * t;
          const double cand_cost = alignment_cost(cand, window, c);
          if (cand_cost <= cost) {
            t = cand;
            cost = cand_cost;
            accepted = true;
            lambda = std::max(lambda / 10.0, kMinDamping);
            break;
          }
        }
      }
      // A step too small to change the cost means we are at the minimum.
      if (delta.allFinite() && delta.norm() < options.update_tol) break;
      lambda *= 10.0;
    }
    if (delta.allFinite() && delta.norm() < options.update_tol) {
      res.converged = true;
      break;
    }
    if (!accepted) break;
  }

  res.t_align = t;
  res.final_cost = cost;
  std::size_t inliers = 0;
  for (const auto& p : window) {
    const PairResidual r = residual(t, p);
    if (!r.near_pi && r.sq < options.inlier_threshold) ++inliers;
  }
  res.inlier_fraction = static_cast<double>(inliers) / static_cast<double>(window.size());
  return res;
}

nlohmann::ordered_json alignment_json(const AlignmentResult& r) {
  nlohmann::ordered_json j;
  j["t_align"] = io::transform_json(r.t_align);
  j["final_cost"] = io::round9(r.final_cost);
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["inlier_fraction"] = io::round9(r.inlier_fraction);
  return j;
}

}  // namespace rfusion
