#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace smalign {

// Deterministic random source. The engine (mt19937_64) is fully specified by
// the C++ standard; the distribution transforms below are hand-rolled because
// std::uniform_real_distribution and friends are implementation-defined and
// would break cross-platform reproducibility of seeded runs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // Standard normal via Box-Muller; caches the second deviate.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

  Eigen::Vector3d normal3() {
    const double x = normal();
    const double y = normal();
    const double z = normal();
    return {x, y, z};
  }

  // Uniform direction on the unit sphere.
  Eigen::Vector3d unit3() {
    Eigen::Vector3d v = normal3();
    double n = v.norm();
    while (n < 1e-12) {
      v = normal3();
      n = v.norm();
    }
    return v / n;
  }

  Eigen::Vector3d uniform_box(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
    const double x = uniform(lo.x(), hi.x());
    const double y = uniform(lo.y(), hi.y());
    const double z = uniform(lo.z(), hi.z());
    return {x, y, z};
  }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace smalign
