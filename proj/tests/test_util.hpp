#pragma once

#include <cmath>

#include "rfusion/rng.hpp"
#include "rfusion/se3.hpp"

namespace rfusion::testing {

inline Vec3 random_unit(Rng& rng) {
  Vec3 v = rng.normal3(1.0);
  while (v.norm() < 1e-6) v = rng.normal3(1.0);
  return v.normalized();
}

inline Mat3 random_rotation(Rng& rng, double max_angle = 3.0) {
  return exp_so3(random_unit(rng) * rng.uniform(0.0, max_angle));
}

inline Transform random_transform(Rng& rng, double max_angle = 3.0, double max_translation = 5.0) {
  return {random_rotation(rng, max_angle), rng.uniform3(-max_translation, max_translation)};
}

inline double transform_distance(const Transform& a, const Transform& b) {
  return (a.translation() - b.translation()).norm() +
         (a.rotation() - b.rotation()).cwiseAbs().maxCoeff();
}

// Truncated power series of the matrix exponential.
template <typename M>
M series_exp(const M& a, int terms = 30) {
  M result = M::Identity();
  M term = M::Identity();
  for (int k = 1; k < terms; ++k) {
    term = term * a / static_cast<double>(k);
    result += term;
  }
  return result;
}

inline Eigen::Matrix4d twist_matrix(const Twist& xi) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  m.topLeftCorner<3, 3>() = hat(xi.phi);
  m.topRightCorner<3, 1>() = xi.rho;
  return m;
}

}  // namespace rfusion::testing
