#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

namespace smalign {

// Direction on the unit 2-sphere. Construction renormalizes, so downstream
// code may rely on |norm() - 1| <= 1e-9 without re-checking.
class UnitVector3 {
 public:
  // Accepts vectors already close to unit length (within 1e-6, absorbing
  // file-format rounding) and renormalizes. Rejects anything else.
  explicit UnitVector3(const Eigen::Vector3d& v) {
    const double n = v.norm();
    if (!(std::abs(n - 1.0) <= 1e-6)) {
      throw std::invalid_argument("UnitVector3: input norm " + std::to_string(n) +
                                  " deviates from 1 by more than 1e-6");
    }
    v_ = v / n;
  }

  // Normalizes an arbitrary non-zero vector.
  static UnitVector3 normalized(const Eigen::Vector3d& v) {
    const double n = v.norm();
    if (!(n > 1e-12)) {
      throw std::invalid_argument("UnitVector3: cannot normalize near-zero vector");
    }
    return UnitVector3(v / n, private_tag{});
  }

  const Eigen::Vector3d& vec() const { return v_; }
  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double z() const { return v_.z(); }

  double dot(const UnitVector3& o) const { return v_.dot(o.v_); }

 private:
  struct private_tag {};
  UnitVector3(const Eigen::Vector3d& unit, private_tag) : v_(unit) {}

  Eigen::Vector3d v_;
};

}  // namespace smalign
