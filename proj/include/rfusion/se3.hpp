#pragma once

// Rigid-body (SE(3)) and rotation (SO(3)) Lie-group arithmetic.
//
// Rotations are stored as 3x3 matrices. Twists are ordered (rho, phi):
// translational part first, rotational part second. All functions are pure.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <span>

namespace rfusion {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Covariance6 = Mat6;

// Below this rotation angle the closed forms switch to Taylor expansions.
inline constexpr double kSmallAngle = 1e-6;
// Within this distance of pi the logarithm uses the eigenvector branch.
inline constexpr double kNearPiAngle = 1e-6;

enum class LogQuality {
  kRegular,
  kNearPi,  // axis recovered from the symmetric part; sign may be conventional
};

struct Twist {
  Vec3 rho = Vec3::Zero();  // meters
  Vec3 phi = Vec3::Zero();  // radians

  Twist() = default;
  Twist(const Vec3& rho_in, const Vec3& phi_in) : rho(rho_in), phi(phi_in) {}

  Vec6 vector() const {
    Vec6 v;
    v << rho, phi;
    return v;
  }
  static Twist from_vector(const Vec6& v) { return {v.head<3>(), v.tail<3>()}; }
};

class Transform {
 public:
  Transform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  Transform(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {}

  static Transform identity() { return {}; }
  static Transform from_quaternion(const Eigen::Quaterniond& q, const Vec3& t) {
    return {q.normalized().toRotationMatrix(), t};
  }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(rotation_).normalized(); }
  Eigen::Matrix4d matrix() const;

  Vec3 operator*(const Vec3& p) const { return rotation_ * p + translation_; }
  Transform operator*(const Transform& other) const {
    return {rotation_ * other.rotation_, rotation_ * other.translation_ + translation_};
  }
  Transform inverse() const {
    const Mat3 rt = rotation_.transpose();
    return {rt, -(rt * translation_)};
  }

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

inline Transform compose(const Transform& a, const Transform& b) { return a * b; }
inline Transform inverse(const Transform& t) { return t.inverse(); }

Mat3 hat(const Vec3& phi);
Vec3 vee(const Mat3& skew);

Mat3 exp_so3(const Vec3& phi);
// Returns the representative with |phi| <= pi.
Vec3 log_so3(const Mat3& rotation, LogQuality* quality = nullptr);

Transform exp_se3(const Twist& xi);
Twist log_se3(const Transform& t, LogQuality* quality = nullptr);

// Left Jacobian of SO(3), i.e. the V matrix coupling translation in exp_se3.
Mat3 so3_left_jacobian(const Vec3& phi);
Mat3 so3_left_jacobian_inverse(const Vec3& phi);

// exp(xi + d) ~= exp(J_l(xi) d) exp(xi); J_r(xi) = J_l(-xi).
Mat6 se3_left_jacobian(const Twist& xi);
Mat6 se3_left_jacobian_inverse(const Twist& xi);
Mat6 se3_right_jacobian_inverse(const Twist& xi);

// Rotation angle in [0, pi].
double rotation_angle(const Mat3& rotation);
bool is_rotation(const Mat3& rotation, double tol = 1e-9);

// xi^T sigma^-1 xi via Cholesky. Throws InvalidCovariance when sigma is not SPD.
double mahalanobis_sq(const Twist& xi, const Covariance6& sigma);

// a * exp(beta * log(a^-1 b)); exact endpoints at beta = 0 and 1.
// Throws std::invalid_argument when beta is outside [0, 1].
Transform geodesic_interp(const Transform& a, const Transform& b, double beta);

// Rigid transform T (no scale) minimizing sum |T est_i - ref_i|^2.
// Throws DegenerateGeometry for fewer than 3 pairs or collinear point sets.
Transform umeyama_align(std::span<const Vec3> est, std::span<const Vec3> ref);

}  // namespace rfusion
