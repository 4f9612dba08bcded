#pragma once

#include <array>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace smalign {

// Rigid camera pose. r is an axis-angle rotation vector (world-to-camera),
// t the camera center in world coordinates; a world point p maps to the
// camera frame as R(r) * (p - t).
struct Pose {
  Eigen::Vector3d r = Eigen::Vector3d::Zero();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
};

// Axis-aligned cube in axis-angle space.
struct RotationCube {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double half_width = 0.0;
};

// Axis-aligned cuboid in translation space.
struct TranslationCuboid {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_widths = Eigen::Vector3d::Zero();
};

// One rotation cube paired with a list of candidate translation cuboids.
struct PoseDomain {
  RotationCube rotation;
  std::vector<TranslationCuboid> translations;
};

// Search node: a rotation cube crossed with a translation cuboid, plus the
// objective bounds established for it so far.
struct BranchRegion {
  RotationCube rotation;
  TranslationCuboid translation;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

// Rodrigues rotation matrix for an axis-angle vector; exact at r = 0.
Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& r);

// Inverse of rotation_matrix with |result| <= pi. Robust near 0 and pi.
Eigen::Vector3d rotation_log(const Eigen::Matrix3d& R);

// Geodesic angle in [0, pi] between the rotations encoded by r1 and r2.
double angular_distance(const Eigen::Vector3d& r1, const Eigen::Vector3d& r2);

// Equivalent rotation vector with norm <= pi.
Eigen::Vector3d wrap_rotation_vector(const Eigen::Vector3d& r);

// Min and max Euclidean distance from p to the (solid) cuboid.
struct DistanceInterval {
  double lo = 0.0;
  double hi = 0.0;
};
DistanceInterval point_cuboid_distance(const TranslationCuboid& box,
                                       const Eigen::Vector3d& p);

// Largest geodesic perturbation any rotation in the cube can apply relative
// to its center: min(sqrt(3) * half_width, pi).
double psi_rot(const RotationCube& cube);

// Largest angle between (point - t) and (point - center) over translations t
// in the cuboid: pi when the point lies inside, otherwise the maximum over
// the 8 vertices.
double psi_trans(const TranslationCuboid& box, const Eigen::Vector3d& point);

// True unless some component mean is within zeta of every point of the
// cuboid (in which case no feasible camera center exists in it).
bool feasible_wrt_zeta(const TranslationCuboid& box,
                       std::span<const Eigen::Vector3d> means, double zeta);

// Whether the branch still has room to split above the numerical floor.
bool is_splittable(const BranchRegion& branch, double floor = 1e-9);

// Octant split of whichever block (rotation cube or translation cuboid)
// currently contributes more angular uncertainty: psi_rot versus the largest
// psi_trans over the given component means. Children inherit the parent's
// lower bound as a valid floor and reset the upper bound.
// Throws std::logic_error when the branch is not splittable.
std::array<BranchRegion, 8> subdivide_adaptive(const BranchRegion& branch,
                                               std::span<const Eigen::Vector3d> means);

// 6D Lebesgue volume of the branch (rotation cube times translation cuboid).
double branch_volume(const BranchRegion& branch);

// Covering of camera centers on a solid torus (circle radius `major` in the
// z = 0 plane, tube radius `minor`) by axis-aligned cubes, paired with the
// full rotation cube [-pi, pi]^3. Cube half-widths are inflated past the tube
// radius so the union provably contains every torus point.
PoseDomain torus_cover(double major, double minor);

}  // namespace smalign
