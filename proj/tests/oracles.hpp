#pragma once

// Slow, independent reference computations used to pin expected values in
// tests. Deliberately written as direct transcriptions of definitions,
// sharing no code with the library implementations they check.

#include <cmath>
#include <functional>

#include <Eigen/Core>

namespace smalign::test {

// Midpoint-rule integral of f over the unit sphere with sin(theta) weights.
// n_theta * n_phi nodes.
inline double sphere_quadrature(const std::function<double(const Eigen::Vector3d&)>& f,
                                int n_theta, int n_phi) {
  const double d_theta = M_PI / n_theta;
  const double d_phi = 2.0 * M_PI / n_phi;
  double acc = 0.0;
  for (int i = 0; i < n_theta; ++i) {
    const double theta = (i + 0.5) * d_theta;
    const double sin_theta = std::sin(theta);
    const double cos_theta = std::cos(theta);
    double ring = 0.0;
    for (int j = 0; j < n_phi; ++j) {
      const double phi = (j + 0.5) * d_phi;
      const Eigen::Vector3d dir(sin_theta * std::cos(phi), sin_theta * std::sin(phi),
                                cos_theta);
      ring += f(dir);
    }
    acc += ring * sin_theta;
  }
  return acc * d_theta * d_phi;
}

}  // namespace smalign::test
