#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "smalign/objective.hpp"
#include "smalign/se3.hpp"
#include "smalign/solver.hpp"
#include "smalign/unit_vector.hpp"

namespace smalign {

// Pinhole camera: pixel = principal + focal * (x/z, y/z) in camera frame.
struct CameraIntrinsics {
  double focal = 800.0;
  Eigen::Vector2d principal{320.0, 240.0};
  int width = 640;
  int height = 480;
};

// Throws std::invalid_argument unless the point is strictly in front (z > 0).
Eigen::Vector2d project_to_pixel(const CameraIntrinsics& intrinsics,
                                 const Eigen::Vector3d& camera_point);

// Unit bearing of the viewing ray through a pixel.
UnitVector3 pixel_to_bearing(const CameraIntrinsics& intrinsics,
                             const Eigen::Vector2d& pixel);

// A random single-view scene. The first n_inliers entries of points_3d and
// pixels_2d correspond: pixel i is the noisy projection of point i under
// true_pose. Outliers follow, flagged false.
struct SyntheticScene {
  std::vector<Eigen::Vector3d> points_3d;
  std::vector<bool> point_is_inlier;
  std::vector<Eigen::Vector2d> pixels_2d;
  std::vector<bool> pixel_is_inlier;
  CameraIntrinsics intrinsics;
  Pose true_pose;
  std::uint64_t seed = 0;
};

// Inliers uniform in [-1,1]^3; camera center uniform on a solid torus around
// the point-set (circle of radius torus_major in the z = 0 plane, tube radius
// torus_minor), optical axis aimed at the origin with a uniform roll about
// it; pixel noise is Gaussian with the given sigma; floor(omega*n_inliers)
// extra 3D points from [-1,1]^3 and uniform random pixels respectively.
// The pose is resampled until every noiseless inlier projection lands inside
// the image; throws std::runtime_error after 1000 rejected poses.
// Draw order per seed is fixed: inlier points, then 4 uniforms per pose
// attempt (ring angle, tube angle, tube radius, roll), then 2 normals per
// inlier pixel, then 3D outliers, then 2D outliers.
SyntheticScene generate_scene(int n_inliers, double omega_3d, double omega_2d,
                              double noise_sigma_px, std::uint64_t seed,
                              double torus_major = 3.5, double torus_minor = 0.5);

struct PoseErrors {
  double rotation_error = 0.0;              // radians
  double translation_error = 0.0;           // model units
  double relative_translation_error = 0.0;  // fraction of camera distance
};

// rotation_error = arccos((trace(Re Rg^T) - 1)/2); translation_error =
// |te - tg|; relative error divides by the ground-truth camera distance to
// the model centroid.
PoseErrors pose_errors(const Pose& estimate, const Pose& truth,
                       const Eigen::Vector3d& model_centroid);

// Strict thresholds: rotation < 0.1 rad and relative translation < 5%.
bool is_success(const PoseErrors& errors);

struct GridOracleResult {
  double value = 0.0;
  Pose pose;
  // Largest |f| change observed between scan-adjacent feasible nodes; the
  // resolution-dependent slack of the oracle minimum.
  double modulus = 0.0;
};

// Exhaustive minimum of the objective over a regular grid: resolution nodes
// per axis (endpoints included; a zero-extent axis gets one node) on the
// rotation cube crossed with every translation cuboid. Infeasible nodes are
// skipped. Throws std::invalid_argument when the grid exceeds 1e8 nodes and
// InfeasiblePoseError when no node is feasible.
GridOracleResult grid_search_oracle(const ObjectiveContext& ctx,
                                    const PoseDomain& domain, int resolution);

struct TrialParams {
  int n_inliers = 30;
  double omega_3d = 0.0;
  double omega_2d = 0.0;
  double noise_sigma_px = 2.0;
  double lambda_p = 0.25;              // model units
  double lambda_f = 2.0 * M_PI / 180.0;  // radians
  double torus_major = 3.5;
  double torus_minor = 0.5;
  SolverConfig solver;  // solver.zeta is also the context standoff radius
  int trial_threads = 1;  // concurrent trials; 0 = hardware concurrency
};

struct TrialRecord {
  std::uint64_t seed = 0;
  PoseErrors errors;
  bool success = false;
  double best_value = 0.0;
  double global_lower = 0.0;
  double gap = 0.0;
  SolverStatus status = SolverStatus::queue_exhausted;
  SolverStats stats;                // the solver's own counters and time
  double wall_time_seconds = 0.0;   // full trial: generation, fitting, solve
  Pose estimate;
};

struct Quartiles {
  double q1 = 0.0;
  double q2 = 0.0;
  double q3 = 0.0;
};

// Linear interpolation between order statistics (the R-7 convention):
// q(p) = x[floor(h)] + frac(h) * (x[floor(h)+1] - x[floor(h)]),
// h = (n-1) p on the sorted sample. Throws on an empty sample.
Quartiles quartiles(std::vector<double> values);

struct TrialAggregate {
  std::vector<TrialRecord> trials;
  double success_rate = 0.0;
  Quartiles rotation_error;               // radians
  Quartiles translation_error;            // model units
  Quartiles relative_translation_error;   // fraction
  Quartiles runtime_seconds;              // wall time per trial
  std::vector<std::string> notes;         // generator conventions in force
};

// Runs one full scene -> mixtures -> solve -> metrics pipeline per seed.
// Trials are independent and may run concurrently (trial_threads); records
// and aggregates are always in trial-index order, so everything except wall
// times is deterministic. Requires seeds.size() >= n_trials; uses the first
// n_trials seeds.
TrialAggregate run_trials(const TrialParams& params, int n_trials,
                          std::span<const std::uint64_t> seeds);

}  // namespace smalign
