#include "smalign/se3.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Geometry>

namespace smalign {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

}  // namespace

Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& r) {
  const double theta2 = r.squaredNorm();
  const Eigen::Matrix3d K = skew(r);
  if (theta2 < 1e-16) {
    // Second-order series; remainder O(theta^3) is below double rounding here.
    return Eigen::Matrix3d::Identity() + K + 0.5 * (K * K);
  }
  const double theta = std::sqrt(theta2);
  return Eigen::Matrix3d::Identity() + (std::sin(theta) / theta) * K +
         ((1.0 - std::cos(theta)) / theta2) * (K * K);
}

Eigen::Vector3d rotation_log(const Eigen::Matrix3d& R) {
  Eigen::Quaterniond q(R);
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();  // keep angle in [0, pi]
  const Eigen::Vector3d v(q.x(), q.y(), q.z());
  const double s = v.norm();  // sin(theta / 2)
  if (s < 1e-12) return 2.0 * v;
  const double theta = 2.0 * std::atan2(s, q.w());
  return (theta / s) * v;
}

double angular_distance(const Eigen::Vector3d& r1, const Eigen::Vector3d& r2) {
  const Eigen::Matrix3d R = rotation_matrix(r1).transpose() * rotation_matrix(r2);
  const Eigen::Vector3d s(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  // atan2 of sin/cos stays accurate at both ends of [0, pi].
  return std::atan2(0.5 * s.norm(), 0.5 * (R.trace() - 1.0));
}

Eigen::Vector3d wrap_rotation_vector(const Eigen::Vector3d& r) {
  Eigen::Vector3d w = r;
  double n = w.norm();
  while (n > M_PI) {
    w *= (1.0 - 2.0 * M_PI / n);
    n = w.norm();
  }
  return w;
}

DistanceInterval point_cuboid_distance(const TranslationCuboid& box,
                                       const Eigen::Vector3d& p) {
  const Eigen::Vector3d d = (p - box.center).cwiseAbs();
  const Eigen::Vector3d outside = (d - box.half_widths).cwiseMax(0.0);
  const Eigen::Vector3d far = d + box.half_widths;
  return {outside.norm(), far.norm()};
}

double psi_rot(const RotationCube& cube) {
  return std::min(std::sqrt(3.0) * cube.half_width, M_PI);
}

double psi_trans(const TranslationCuboid& box, const Eigen::Vector3d& point) {
  const Eigen::Vector3d d = (point - box.center).cwiseAbs();
  if ((d.array() <= box.half_widths.array()).all()) return M_PI;
  const Eigen::Vector3d center_dir = point - box.center;
  double worst = 0.0;
  for (int sx = -1; sx <= 1; sx += 2) {
    for (int sy = -1; sy <= 1; sy += 2) {
      for (int sz = -1; sz <= 1; sz += 2) {
        const Eigen::Vector3d vertex =
            box.center + Eigen::Vector3d(sx * box.half_widths.x(),
                                         sy * box.half_widths.y(),
                                         sz * box.half_widths.z());
        const Eigen::Vector3d v = point - vertex;
        const double angle =
            std::atan2(center_dir.cross(v).norm(), center_dir.dot(v));
        worst = std::max(worst, angle);
      }
    }
  }
  return worst;
}

bool feasible_wrt_zeta(const TranslationCuboid& box,
                       std::span<const Eigen::Vector3d> means, double zeta) {
  for (const Eigen::Vector3d& mu : means) {
    if (point_cuboid_distance(box, mu).hi < zeta) return false;
  }
  return true;
}

bool is_splittable(const BranchRegion& branch, double floor) {
  return branch.rotation.half_width > floor ||
         branch.translation.half_widths.maxCoeff() > floor;
}

std::array<BranchRegion, 8> subdivide_adaptive(const BranchRegion& branch,
                                               std::span<const Eigen::Vector3d> means) {
  constexpr double kFloor = 1e-9;
  const bool rot_ok = branch.rotation.half_width > kFloor;
  const bool trans_ok = branch.translation.half_widths.maxCoeff() > kFloor;
  if (!rot_ok && !trans_ok) {
    throw std::logic_error("subdivide_adaptive: branch below the splitting floor");
  }

  double psi_t = 0.0;
  for (const Eigen::Vector3d& mu : means) {
    psi_t = std::max(psi_t, psi_trans(branch.translation, mu));
  }
  const bool split_rotation = rot_ok && (!trans_ok || psi_rot(branch.rotation) >= psi_t);

  std::array<BranchRegion, 8> children;
  int idx = 0;
  for (int sx = -1; sx <= 1; sx += 2) {
    for (int sy = -1; sy <= 1; sy += 2) {
      for (int sz = -1; sz <= 1; sz += 2) {
        BranchRegion child = branch;
        child.upper = std::numeric_limits<double>::infinity();
        // Parent's lower bound stays valid on any subset of the parent.
        child.lower = branch.lower;
        const Eigen::Vector3d sign(sx, sy, sz);
        if (split_rotation) {
          const double h = 0.5 * branch.rotation.half_width;
          child.rotation.center = branch.rotation.center + h * sign;
          child.rotation.half_width = h;
        } else {
          const Eigen::Vector3d h = 0.5 * branch.translation.half_widths;
          child.translation.center =
              branch.translation.center + h.cwiseProduct(sign);
          child.translation.half_widths = h;
        }
        children[idx++] = child;
      }
    }
  }
  return children;
}

double branch_volume(const BranchRegion& branch) {
  const double w = 2.0 * branch.rotation.half_width;
  const Eigen::Vector3d t = 2.0 * branch.translation.half_widths;
  return w * w * w * t.x() * t.y() * t.z();
}

PoseDomain torus_cover(double major, double minor) {
  if (!(major > 0.0) || !(minor > 0.0) || !(minor < major)) {
    throw std::invalid_argument("torus_cover: need 0 < minor < major");
  }
  const int n = static_cast<int>(std::ceil(2.0 * M_PI * major / minor));
  // A torus point is within `minor` of the circle, and the nearest circle
  // point is within one chord of the nearest cube center, so cubes of
  // half-width minor + 2 major sin(pi / 2n) cover the solid torus.
  const double half_width = minor + 2.0 * major * std::sin(M_PI / (2.0 * n));
  PoseDomain domain;
  domain.rotation = RotationCube{Eigen::Vector3d::Zero(), M_PI};
  domain.translations.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double angle = 2.0 * M_PI * k / n;
    TranslationCuboid box;
    box.center = Eigen::Vector3d(major * std::cos(angle), major * std::sin(angle), 0.0);
    box.half_widths = Eigen::Vector3d::Constant(half_width);
    domain.translations.push_back(box);
  }
  return domain;
}

}  // namespace smalign
