#include "smalign/bench.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "smalign/errors.hpp"

using namespace smalign;

namespace {

// Two Gaussians loosely facing two image components: small enough for grid
// oracles, structured enough that the minimum is not at the domain center.
ObjectiveContext toy_pair_context(double zeta = 0.4) {
  Gmm model{{IsotropicGaussian(Eigen::Vector3d(0.3, 0.0, 2.2), 0.5, 0.6),
             IsotropicGaussian(Eigen::Vector3d(-0.4, 0.2, 1.8), 0.7, 0.4)}};
  Vmfmm image{{VmfComponent(UnitVector3(Eigen::Vector3d(0.12, 0.0, 1.0).normalized()), 6.0, 0.55),
               VmfComponent(UnitVector3(Eigen::Vector3d(-0.2, 0.1, 1.0).normalized()), 4.0, 0.45)}};
  return ObjectiveContext(model, image, zeta);
}

PoseDomain small_domain(double rot_hw, double trans_hw) {
  PoseDomain d;
  d.rotation.half_width = rot_hw;
  TranslationCuboid box;
  box.center = Eigen::Vector3d(0.05, -0.05, 0.1);
  box.half_widths = Eigen::Vector3d::Constant(trans_hw);
  d.translations.push_back(box);
  return d;
}

}  // namespace

TEST_CASE("projection and bearing agree on hand values and round-trip") {
  CameraIntrinsics cam;  // f=800, principal (320,240), 640x480

  const Eigen::Vector2d on_axis = project_to_pixel(cam, {0.0, 0.0, 5.0});
  CHECK(on_axis.x() == doctest::Approx(320.0).epsilon(1e-12));
  CHECK(on_axis.y() == doctest::Approx(240.0).epsilon(1e-12));

  const Eigen::Vector2d off_axis = project_to_pixel(cam, {0.5, 0.0, 5.0});
  CHECK(off_axis.x() == doctest::Approx(400.0).epsilon(1e-12));
  CHECK(off_axis.y() == doctest::Approx(240.0).epsilon(1e-12));

  CHECK_THROWS_AS(project_to_pixel(cam, {0.0, 0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(project_to_pixel(cam, {0.0, 0.0, -2.0}), std::invalid_argument);

  const Eigen::Vector3d center_ray = pixel_to_bearing(cam, {320.0, 240.0}).vec();
  CHECK((center_ray - Eigen::Vector3d(0, 0, 1)).norm() < 1e-12);
  const Eigen::Vector3d off_ray = pixel_to_bearing(cam, {400.0, 240.0}).vec();
  CHECK((off_ray - Eigen::Vector3d(0.1, 0.0, 1.0).normalized()).norm() < 1e-12);

  // pixel -> bearing -> pixel is the identity wherever z > 0.
  const Eigen::Vector2d px(123.25, 401.5);
  const Eigen::Vector3d ray = pixel_to_bearing(cam, px).vec();
  const Eigen::Vector2d back = project_to_pixel(cam, ray * 3.7);
  CHECK((back - px).norm() < 1e-9);
}

TEST_CASE("generate_scene sizes, flags, and determinism follow the contract") {
  const SyntheticScene scene = generate_scene(30, 0.5, 0.5, 2.0, 1234);

  REQUIRE(scene.points_3d.size() == 45);  // 30 inliers + floor(0.5*30)
  REQUIRE(scene.pixels_2d.size() == 45);
  REQUIRE(scene.point_is_inlier.size() == 45);
  REQUIRE(scene.pixel_is_inlier.size() == 45);
  for (std::size_t i = 0; i < 45; ++i) {
    CHECK(scene.point_is_inlier[i] == (i < 30));
    CHECK(scene.pixel_is_inlier[i] == (i < 30));
  }
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(scene.points_3d[i].cwiseAbs().maxCoeff() <= 1.0);
  }
  for (const auto& px : scene.pixels_2d) {
    CHECK(px.x() >= 0.0);
    CHECK(px.x() <= scene.intrinsics.width);
    CHECK(px.y() >= 0.0);
    CHECK(px.y() <= scene.intrinsics.height);
  }

  const SyntheticScene again = generate_scene(30, 0.5, 0.5, 2.0, 1234);
  REQUIRE(again.points_3d.size() == scene.points_3d.size());
  for (std::size_t i = 0; i < scene.points_3d.size(); ++i) {
    CHECK(again.points_3d[i] == scene.points_3d[i]);
    CHECK(again.pixels_2d[i] == scene.pixels_2d[i]);
  }
  CHECK(again.true_pose.r == scene.true_pose.r);
  CHECK(again.true_pose.t == scene.true_pose.t);

  const SyntheticScene other = generate_scene(30, 0.5, 0.5, 2.0, 1235);
  CHECK(other.true_pose.t != scene.true_pose.t);

  CHECK_THROWS_AS(generate_scene(2, 0.0, 0.0, 2.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_scene(30, -0.1, 0.0, 2.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_scene(30, 0.0, 0.0, -1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_scene(30, 0.0, 0.0, 2.0, 1, 3.0, 3.5),
                  std::invalid_argument);
}

TEST_CASE("noiseless inlier pixels are exact projections under the true pose") {
  const SyntheticScene scene = generate_scene(20, 0.0, 0.0, 0.0, 777);
  const Eigen::Matrix3d R = rotation_matrix(scene.true_pose.r);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector3d q = R * (scene.points_3d[i] - scene.true_pose.t);
    REQUIRE(q.z() > 0.0);
    const Eigen::Vector2d px = project_to_pixel(scene.intrinsics, q);
    CHECK((px - scene.pixels_2d[i]).norm() < 1e-9);
  }

  // With noise the pixels move, but only by a few sigma.
  const SyntheticScene noisy = generate_scene(20, 0.0, 0.0, 2.0, 777);
  bool any_moved = false;
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector3d q = R * (noisy.points_3d[i] - noisy.true_pose.t);
    const Eigen::Vector2d px = project_to_pixel(noisy.intrinsics, q);
    const double shift = (px - noisy.pixels_2d[i]).norm();
    if (shift > 0.0) any_moved = true;
    CHECK(shift < 20.0);  // 10 sigma
  }
  CHECK(any_moved);
}

TEST_CASE("pose_errors reproduces hand-computed rotation and translation errors") {
  const Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  Pose truth;
  truth.t = Eigen::Vector3d(3.0, 0.0, 0.0);

  const PoseErrors zero = pose_errors(truth, truth, centroid);
  CHECK(zero.rotation_error == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(zero.translation_error == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(zero.relative_translation_error == doctest::Approx(0.0).epsilon(1e-12));

  Pose turned = truth;
  turned.r = Eigen::Vector3d(0.0, 0.0, 0.1);
  CHECK(pose_errors(turned, truth, centroid).rotation_error ==
        doctest::Approx(0.1).epsilon(1e-9));

  // The same physical rotation written as a near-2pi vector.
  Pose wrapped = truth;
  wrapped.r = Eigen::Vector3d(0.0, 0.0, 0.1 - 2.0 * M_PI);
  CHECK(pose_errors(wrapped, truth, centroid).rotation_error ==
        doctest::Approx(0.1).epsilon(1e-9));

  Pose shifted = truth;
  shifted.t += Eigen::Vector3d(0.0, 0.06, 0.0);
  const PoseErrors e = pose_errors(shifted, truth, centroid);
  CHECK(e.translation_error == doctest::Approx(0.06).epsilon(1e-12));
  CHECK(e.relative_translation_error == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("is_success applies both thresholds strictly") {
  CHECK(is_success({0.0999, 1.0, 0.0499}));
  CHECK_FALSE(is_success({0.1, 1.0, 0.01}));       // rotation at the limit
  CHECK_FALSE(is_success({0.01, 1.0, 0.05}));      // translation at the limit
  CHECK_FALSE(is_success({0.5, 1.0, 0.5}));
  CHECK(is_success({0.0, 0.0, 0.0}));
}

TEST_CASE("quartiles follow linear order-statistic interpolation") {
  CHECK_THROWS_AS(quartiles({}), std::invalid_argument);

  const Quartiles single = quartiles({3.5});
  CHECK(single.q1 == 3.5);
  CHECK(single.q2 == 3.5);
  CHECK(single.q3 == 3.5);

  const Quartiles odd = quartiles({5, 1, 3, 2, 4});
  CHECK(odd.q1 == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(odd.q2 == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(odd.q3 == doctest::Approx(4.0).epsilon(1e-12));

  const Quartiles even = quartiles({4, 2, 1, 3});
  CHECK(even.q1 == doctest::Approx(1.75).epsilon(1e-12));
  CHECK(even.q2 == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(even.q3 == doctest::Approx(3.25).epsilon(1e-12));
}

TEST_CASE("grid oracle handles degenerate domains and validates input") {
  const ObjectiveContext ctx = toy_pair_context();

  // Zero-extent domain: one node, equal to the direct evaluation.
  const PoseDomain point = small_domain(0.0, 0.0);
  const GridOracleResult one = grid_search_oracle(ctx, point, 9);
  Pose center;
  center.r = point.rotation.center;
  center.t = point.translations[0].center;
  CHECK(one.value == doctest::Approx(objective_value(ctx, center)).epsilon(1e-12));
  CHECK(one.modulus == 0.0);

  const PoseDomain domain = small_domain(0.3, 0.25);
  CHECK_THROWS_AS(grid_search_oracle(ctx, domain, 0), std::invalid_argument);
  CHECK_THROWS_AS(grid_search_oracle(ctx, domain, 700), std::invalid_argument);

  // Every translation node closer than zeta to some mean: nothing feasible.
  PoseDomain swallowed;
  swallowed.rotation.half_width = 0.1;
  TranslationCuboid tight;
  tight.center = Eigen::Vector3d(0.3, 0.0, 2.2);  // first component mean
  tight.half_widths = Eigen::Vector3d::Constant(0.05);
  swallowed.translations.push_back(tight);
  CHECK_THROWS_AS(grid_search_oracle(ctx, swallowed, 3), InfeasiblePoseError);
}

TEST_CASE("grid refinement with nested nodes never raises the oracle minimum") {
  const ObjectiveContext ctx = toy_pair_context();
  const PoseDomain domain = small_domain(0.3, 0.25);

  // linspace(a,b,3) is a subset of linspace(a,b,5): the min can only drop.
  const GridOracleResult coarse = grid_search_oracle(ctx, domain, 3);
  const GridOracleResult fine = grid_search_oracle(ctx, domain, 5);
  CHECK(fine.value <= coarse.value + 1e-12);
  CHECK(std::isfinite(fine.modulus));
  CHECK(fine.modulus >= 0.0);

  // The reported pose attains the reported value.
  CHECK(objective_value(ctx, fine.pose) == doctest::Approx(fine.value).epsilon(1e-12));
}

TEST_CASE("solver matches the grid oracle on a toy domain") {
  const ObjectiveContext ctx = toy_pair_context();
  const PoseDomain domain = small_domain(0.3, 0.25);
  const GridOracleResult oracle = grid_search_oracle(ctx, domain, 7);

  SolverConfig cfg;
  cfg.epsilon = 0.05;
  cfg.zeta = 0.4;
  cfg.batch_size = 256;
  cfg.max_evaluations = 60000;
  const SolverReport r = solve(ctx, domain, cfg);

  // The certified band must bracket the oracle from below, and the incumbent
  // can exceed the best grid node by at most the epsilon certificate.
  CHECK(r.global_lower <= oracle.value + 1e-9);
  CHECK(r.best_value <= oracle.value + cfg.epsilon);
  CHECK(std::isfinite(r.best_value));
}

TEST_CASE("run_trials aggregates in seed order and replays identically") {
  TrialParams params;
  params.n_inliers = 12;
  params.noise_sigma_px = 1.0;
  params.solver.epsilon = 0.1;
  params.solver.batch_size = 512;
  params.solver.max_evaluations = 30000;

  const std::vector<std::uint64_t> seeds = {7, 8, 9};
  const TrialAggregate agg = run_trials(params, 2, seeds);

  REQUIRE(agg.trials.size() == 2);
  CHECK(agg.trials[0].seed == 7);
  CHECK(agg.trials[1].seed == 8);
  CHECK(!agg.notes.empty());
  for (const TrialRecord& t : agg.trials) {
    CHECK(std::isfinite(t.best_value));
    CHECK(t.gap == doctest::Approx(t.best_value - t.global_lower).epsilon(1e-12));
    CHECK(t.wall_time_seconds > 0.0);
    CHECK(t.stats.bound_evaluations > 0);
    CHECK(t.success == is_success(t.errors));
  }
  const double expected_rate =
      (agg.trials[0].success ? 0.5 : 0.0) + (agg.trials[1].success ? 0.5 : 0.0);
  CHECK(agg.success_rate == doctest::Approx(expected_rate).epsilon(1e-12));
  CHECK(agg.runtime_seconds.q2 > 0.0);

  CHECK_THROWS_AS(run_trials(params, 0, seeds), std::invalid_argument);
  CHECK_THROWS_AS(run_trials(params, 4, seeds), std::invalid_argument);

  // Same seeds, same records, regardless of trial-level threading.
  TrialParams threaded = params;
  threaded.trial_threads = 2;
  const TrialAggregate agg2 = run_trials(threaded, 2, seeds);
  REQUIRE(agg2.trials.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(agg2.trials[i].best_value == agg.trials[i].best_value);
    CHECK(agg2.trials[i].errors.rotation_error == agg.trials[i].errors.rotation_error);
    CHECK(agg2.trials[i].errors.translation_error ==
          agg.trials[i].errors.translation_error);
    CHECK(agg2.trials[i].status == agg.trials[i].status);
    CHECK(agg2.trials[i].estimate.r == agg.trials[i].estimate.r);
    CHECK(agg2.trials[i].estimate.t == agg.trials[i].estimate.t);
  }
}
