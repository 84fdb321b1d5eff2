#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <stdexcept>
#include <string>
#include <vector>

namespace bitesim {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

using Vec3List = std::vector<Vec3, Eigen::aligned_allocator<Vec3>>;

/// Rigid transform: x_world = rotation * x_local + translation.
struct Pose {
  Vec3 translation = Vec3::Zero();
  Quat rotation = Quat::Identity();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 apply_inverse(const Vec3& p) const { return rotation.conjugate() * (p - translation); }
  Pose compose(const Pose& inner) const {
    return {rotation * inner.translation + translation, (rotation * inner.rotation).normalized()};
  }
};

// Error taxonomy shared across modules. All are std::runtime_error so callers
// that do not care about the category can catch one type.

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Formats a double with 9 significant digits ("%.9g"), the fixed numeric
/// rendering of every text output in the project.
std::string fmt9(double value);

}  // namespace bitesim
