#pragma once

#include <optional>
#include <vector>

#include "rfusion/se3.hpp"

namespace rfusion {

// Timestamped rigid transform with optional (rho, phi)-ordered covariance.
struct StampedPose {
  double t = 0.0;
  Transform pose;
  std::optional<Covariance6> covariance;
};

using Trajectory = std::vector<StampedPose>;

}  // namespace rfusion
