#include "rfusion/se3.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rfusion/errors.hpp"

namespace rfusion {

namespace {

// Series cutoff for coefficient functions whose closed forms cancel badly.
constexpr double kSeriesAngle = 1e-2;

// (1 - cos t) / t^2
double coeff_one_minus_cos(double t) {
  if (t < kSeriesAngle) {
    const double t2 = t * t;
    return 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
  }
  const double h = std::sin(0.5 * t);
  return 2.0 * h * h / (t * t);
}

// (t - sin t) / t^3
double coeff_t_minus_sin(double t) {
  if (t < kSeriesAngle) {
    const double t2 = t * t;
    return 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
  }
  return (t - std::sin(t)) / (t * t * t);
}

// (1 - (t/2) cot(t/2)) / t^2
double coeff_inverse_v(double t) {
  if (t < kSeriesAngle) {
    const double t2 = t * t;
    return 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  }
  const double half = 0.5 * t;
  return (1.0 - half * std::cos(half) / std::sin(half)) / (t * t);
}

// (t^2 + 2 cos t - 2) / (2 t^4)
double coeff_q2(double t) {
  if (t < kSeriesAngle) {
    const double t2 = t * t;
    return 1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40320.0;
  }
  const double t2 = t * t;
  return (t2 + 2.0 * std::cos(t) - 2.0) / (2.0 * t2 * t2);
}

// (2t - 3 sin t + t cos t) / (2 t^5)
double coeff_q3(double t) {
  if (t < kSeriesAngle) {
    const double t2 = t * t;
    return 1.0 / 120.0 - t2 / 2520.0 + t2 * t2 / 120960.0;
  }
  const double t2 = t * t;
  return (2.0 * t - 3.0 * std::sin(t) + t * std::cos(t)) / (2.0 * t2 * t2 * t);
}

Mat3 se3_q_block(const Vec3& rho, const Vec3& phi) {
  const double t = phi.norm();
  const Mat3 p = hat(phi);
  const Mat3 r = hat(rho);
  const Mat3 pr = p * r;
  const Mat3 rp = r * p;
  const Mat3 prp = pr * p;
  const Mat3 ppr = p * pr;
  const Mat3 rpp = rp * p;
  return 0.5 * r + coeff_t_minus_sin(t) * (pr + rp + prp) +
         coeff_q2(t) * (ppr + rpp - 3.0 * prp) + coeff_q3(t) * (prp * p + p * prp);
}

}  // namespace

Eigen::Matrix4d Transform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Mat3 hat(const Vec3& phi) {
  Mat3 s;
  // clang-format off
  s <<      0.0, -phi.z(),  phi.y(),
        phi.z(),      0.0, -phi.x(),
       -phi.y(),  phi.x(),      0.0;
  // clang-format on
  return s;
}

Vec3 vee(const Mat3& skew) { return {skew(2, 1), skew(0, 2), skew(1, 0)}; }

Mat3 exp_so3(const Vec3& phi) {
  const double t = phi.norm();
  const Mat3 k = hat(phi);
  if (t < kSmallAngle) {
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  return Mat3::Identity() + (std::sin(t) / t) * k + coeff_one_minus_cos(t) * k * k;
}

Vec3 log_so3(const Mat3& rotation, LogQuality* quality) {
  const Vec3 w = 0.5 * vee(rotation - rotation.transpose());  // sin(t) * axis
  const double s = w.norm();
  const double c = 0.5 * (rotation.trace() - 1.0);
  const double t = std::atan2(s, c);
  if (quality) *quality = LogQuality::kRegular;

  if (t < kSmallAngle) {
    return w * (1.0 + s * s / 6.0);
  }
  if (std::numbers::pi - t >= kNearPiAngle) {
    return (t / s) * w;
  }

  // Near pi the skew part vanishes; the axis is the unit-eigenvalue eigenvector
  // of the symmetric part.
  if (quality) *quality = LogQuality::kNearPi;
  const Mat3 sym = 0.5 * (rotation + rotation.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(sym);
  Vec3 axis = eig.eigenvectors().col(2).normalized();
  const double along = axis.dot(w);
  if (std::abs(along) > 1e-15) {
    if (along < 0.0) axis = -axis;
  } else {
    for (int i = 0; i < 3; ++i) {
      if (std::abs(axis[i]) > 1e-12) {
        if (axis[i] < 0.0) axis = -axis;
        break;
      }
    }
  }
  return t * axis;
}

Mat3 so3_left_jacobian(const Vec3& phi) {
  const double t = phi.norm();
  const Mat3 k = hat(phi);
  return Mat3::Identity() + coeff_one_minus_cos(t) * k + coeff_t_minus_sin(t) * k * k;
}

Mat3 so3_left_jacobian_inverse(const Vec3& phi) {
  const double t = phi.norm();
  const Mat3 k = hat(phi);
  return Mat3::Identity() - 0.5 * k + coeff_inverse_v(t) * k * k;
}

Transform exp_se3(const Twist& xi) {
  return {exp_so3(xi.phi), so3_left_jacobian(xi.phi) * xi.rho};
}

Twist log_se3(const Transform& t, LogQuality* quality) {
  const Vec3 phi = log_so3(t.rotation(), quality);
  return {so3_left_jacobian_inverse(phi) * t.translation(), phi};
}

Mat6 se3_left_jacobian(const Twist& xi) {
  Mat6 j = Mat6::Zero();
  const Mat3 jr = so3_left_jacobian(xi.phi);
  j.topLeftCorner<3, 3>() = jr;
  j.bottomRightCorner<3, 3>() = jr;
  j.topRightCorner<3, 3>() = se3_q_block(xi.rho, xi.phi);
  return j;
}

Mat6 se3_left_jacobian_inverse(const Twist& xi) {
  Mat6 j = Mat6::Zero();
  const Mat3 ji = so3_left_jacobian_inverse(xi.phi);
  j.topLeftCorner<3, 3>() = ji;
  j.bottomRightCorner<3, 3>() = ji;
  j.topRightCorner<3, 3>() = -ji * se3_q_block(xi.rho, xi.phi) * ji;
  return j;
}

Mat6 se3_right_jacobian_inverse(const Twist& xi) {
  return se3_left_jacobian_inverse(Twist(-xi.rho, -xi.phi));
}

double rotation_angle(const Mat3& rotation) {
  const double s = 0.5 * vee(rotation - rotation.transpose()).norm();
  const double c = 0.5 * (rotation.trace() - 1.0);
  return std::atan2(s, c);
}

bool is_rotation(const Mat3& rotation, double tol) {
  return (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(rotation.determinant() - 1.0) <= tol;
}

double mahalanobis_sq(const Twist& xi, const Covariance6& sigma) {
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if (!sigma.allFinite() || (sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InvalidCovariance("covariance is not symmetric");
  }
  const Eigen::LLT<Mat6> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw InvalidCovariance("covariance is not positive definite");
  }
  const Vec6 whitened = llt.matrixL().solve(xi.vector());
  return whitened.squaredNorm();
}

Transform geodesic_interp(const Transform& a, const Transform& b, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("interpolation factor must lie in [0, 1]");
  }
  if (beta == 0.0) return a;
  if (beta == 1.0) return b;
  const Twist d = log_se3(a.inverse() * b);
  return a * exp_se3(Twist(beta * d.rho, beta * d.phi));
}

Transform umeyama_align(std::span<const Vec3> est, std::span<const Vec3> ref) {
  if (est.size() != ref.size()) {
    throw std::invalid_argument("point sets differ in size");
  }
  if (est.size() < 3) {
    throw DegenerateGeometry("rigid alignment needs at least 3 point pairs");
  }
  const double n = static_cast<double>(est.size());
  Vec3 mean_est = Vec3::Zero();
  Vec3 mean_ref = Vec3::Zero();
  for (std::size_t i = 0; i < est.size(); ++i) {
    mean_est += est[i];
    mean_ref += ref[i];
  }
  mean_est /= n;
  mean_ref /= n;

  Mat3 cross = Mat3::Zero();
  for (std::size_t i = 0; i < est.size(); ++i) {
    cross += (ref[i] - mean_ref) * (est[i] - mean_est).transpose();
  }
  cross /= n;

  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0]) {
    throw DegenerateGeometry("point sets are collinear or coincident");
  }
  Vec3 d = Vec3::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d[2] = -1.0;
  const Mat3 rotation = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  return {rotation, mean_ref - rotation * mean_est};
}

}  // namespace rfusion
