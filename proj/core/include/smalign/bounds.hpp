#pragma once

#include <limits>
#include <optional>

#include <Eigen/Core>

#include "smalign/objective.hpp"
#include "smalign/se3.hpp"
#include "smalign/sphere_stats.hpp"
#include "smalign/unit_vector.hpp"

namespace smalign {

// Range of the concentration map kappa(t) = (d(t)/sigma)^2 + 1 over a
// translation cuboid. The +1 offset keeps lo >= 1.
struct KappaInterval {
  double lo = 1.0;
  double hi = 1.0;
};

// Exact kappa range of a Gaussian component over the cuboid, with the minimum
// distance floored at zeta. Throws InfeasiblePoseError when every point of the
// cuboid is within zeta of the mean.
KappaInterval kappa_interval(const IsotropicGaussian& g, const TranslationCuboid& cuboid,
                             double zeta);

// Upper bound on the angle between the camera-frame bearings of two model
// means over all translations in the branch:
// min(pi, angle(mu_i - t0, mu_j - t0) + psi_t(i) + psi_t(j)).
double spread_angle_A(const Eigen::Vector3d& mu_i, const Eigen::Vector3d& mu_j,
                      const BranchRegion& branch);

// Lower bound on the angle between a rotated model bearing and an image
// direction over all poses in the branch:
// max(0, angle(mu_i - t0, R(r0)^T d_j) - psi_t(i) - psi_r).
double alignment_angle_B(const Eigen::Vector3d& mu_i, const UnitVector3& image_dir,
                         const BranchRegion& branch);

// Objective at the branch center pose; if the center violates the zeta
// constraint, at a nearby feasible point of the cuboid instead. +infinity when
// no feasible point is found (the branch is then prunable).
double upper_bound(const ObjectiveContext& ctx, const BranchRegion& branch);

// The pose at which upper_bound evaluates the objective: the branch center,
// with the translation nudged out of any standoff ball and clamped to the
// cuboid. Empty when the branch has no feasible point reachable that way.
std::optional<Pose> upper_bound_pose(const ObjectiveContext& ctx,
                                     const BranchRegion& branch);

// Sound lower bound on min f over the branch: each pair ratio is bounded in
// coupled log form over the concentration intervals and the A/B angle bounds,
// keeping terms finite at any concentration scale. Never below branch.lower
// (bounds inherited from the parent stay valid for the child). +infinity for
// infeasible branches.
double lower_bound(const ObjectiveContext& ctx, const BranchRegion& branch);

struct BoundPair {
  double lower = 0.0;
  double upper = 0.0;
};

// Fused lower + upper evaluation sharing the per-branch precomputation; equal
// to calling lower_bound and upper_bound separately. When the lower bound
// reaches skip_upper_at, the upper evaluation is skipped and +infinity stands
// in: any caller holding an incumbent at or below the threshold prunes such a
// branch without consulting its upper bound.
BoundPair evaluate_bounds(const ObjectiveContext& ctx, const BranchRegion& branch,
                          double skip_upper_at = std::numeric_limits<double>::infinity());

}  // namespace smalign
