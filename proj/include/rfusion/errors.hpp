#pragma once

#include <stdexcept>
#include <string>

namespace rfusion {

// Geometry that cannot determine a unique rigid transform (too few or collinear points).
class DegenerateGeometry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Covariance that is not symmetric positive definite.
class InvalidCovariance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Out-of-order or otherwise malformed event/sample stream.
class StreamError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs a metric cannot be computed from (too few matches, no delta pairs).
class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing or unreadable input files. Carries the offending path.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace rfusion
