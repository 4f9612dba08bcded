#include <doctest.h>

#include <cmath>
#include <vector>

#include "smalign/errors.hpp"
#include "smalign/sphere_stats.hpp"
#include "smalign/rng.hpp"

#include "oracles.hpp"

using namespace smalign;
using smalign::test::sphere_quadrature;

namespace {
const UnitVector3 kZHat = UnitVector3::normalized(Eigen::Vector3d(0, 0, 1));
}

TEST_CASE("unit vector construction") {
  CHECK_THROWS_AS(UnitVector3(Eigen::Vector3d(0, 0, 0)), std::invalid_argument);
  CHECK_THROWS_AS(UnitVector3(Eigen::Vector3d(3, 4, 0)), std::invalid_argument);
  CHECK_THROWS_AS(UnitVector3::normalized(Eigen::Vector3d(0, 0, 0)), std::invalid_argument);

  // Near-unit input is accepted and snapped to exact unit length.
  const UnitVector3 u(Eigen::Vector3d(1.0 + 5e-7, 0, 0));
  CHECK(std::abs(u.vec().norm() - 1.0) <= 1e-9);
  const UnitVector3 v = UnitVector3::normalized(Eigen::Vector3d(3, 4, 0));
  CHECK(v.x() == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(std::abs(v.vec().norm() - 1.0) <= 1e-9);
}

TEST_CASE("component invariants enforced at construction") {
  CHECK_THROWS_AS(IsotropicGaussian(Eigen::Vector3d(0, 0, 0), 0.0, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(IsotropicGaussian(Eigen::Vector3d(0, 0, 0), -1.0, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(IsotropicGaussian(Eigen::Vector3d(0, 0, 0), 1.0, -0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(VmfComponent(kZHat, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(VmfComponent(kZHat, 1.0, -1.0), std::invalid_argument);
}

TEST_CASE("partition function values") {
  CHECK(z_eval(0.0) == 2.0);
  // (e - 1/e) / 1
  CHECK(z_eval(1.0) == doctest::Approx(2.350402387287603).epsilon(1e-14));
  // Small-argument limit approached smoothly from above.
  CHECK(z_eval(1e-9) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(z_eval(1e-9) >= 2.0);
  // kappa + log1p(-e^(-2 kappa)) - log(kappa) at kappa = 800.
  CHECK(log_z_eval(800.0) == doctest::Approx(793.315388272332).epsilon(1e-12));
  CHECK_THROWS_AS(z_eval(-1.0), std::domain_error);
}

TEST_CASE("partition function is strictly increasing") {
  // Z'(k) > 0 for k > 0; checked at geometrically spaced sample pairs.
  double prev = z_eval(1e-3);
  const int n = 10000;
  for (int i = 1; i <= n; ++i) {
    const double k = 1e-3 * std::pow(1000.0 / 1e-3, static_cast<double>(i) / n);
    if (k > 700.0) break;  // linear form overflows past exp range
    const double z = z_eval(k);
    REQUIRE(z > prev);
    prev = z;
  }
  double prev_log = log_z_eval(1e-3);
  for (int i = 1; i <= n; ++i) {
    const double k = 1e-3 * std::pow(1e6 / 1e-3, static_cast<double>(i) / n);
    const double lz = log_z_eval(k);
    REQUIRE(lz > prev_log);
    prev_log = lz;
  }
}

TEST_CASE("log and linear partition evaluations agree") {
  for (int i = 0; i <= 1000; ++i) {
    const double k = 1.0 + 29.0 * i / 1000.0;
    REQUIRE(std::abs(std::log(z_eval(k)) - log_z_eval(k)) < 1e-10);
  }
  // Both evaluation forms agree at the internal switch point.
  CHECK(z_eval(30.0) == doctest::Approx(std::exp(log_z_eval(30.0))).epsilon(1e-12));
}

TEST_CASE("log partition derivative matches finite differences") {
  const double h = 1e-6;
  for (double k : {0.01, 0.1, 0.5, 1.0, 3.0, 10.0, 25.0, 100.0, 1000.0}) {
    const double fd = (log_z_eval(k + h) - log_z_eval(k - h)) / (2.0 * h);
    CHECK(log_z_deriv(k) == doctest::Approx(fd).epsilon(1e-6));
  }
  CHECK(log_z_deriv(0.0) == 0.0);
  // Mean resultant length lies in [0, 1).
  for (double k : {1e-8, 1.0, 50.0, 1e5}) {
    CHECK(log_z_deriv(k) >= 0.0);
    CHECK(log_z_deriv(k) < 1.0);
  }
}

TEST_CASE("vMF density value and normalization") {
  // Mode height at kappa = 1: e / (2 pi Z(1)).
  const double expected = std::exp(1.0) / (2.0 * M_PI * z_eval(1.0));
  CHECK(vmf_density(kZHat, kZHat, 1.0) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(vmf_density(kZHat, kZHat, 1.0) ==
        doctest::Approx(0.184065499616596).epsilon(1e-12));

  // Antipodal value, kappa = 1: e^-1 / (2 pi Z(1)).
  const UnitVector3 neg_z = UnitVector3::normalized(Eigen::Vector3d(0, 0, -1));
  CHECK(vmf_density(neg_z, kZHat, 1.0) ==
        doctest::Approx(std::exp(-1.0) / (2.0 * M_PI * z_eval(1.0))).epsilon(1e-14));

  // Integrates to one over the sphere, including concentrations where the
  // linear-domain normalizer would overflow without the log form.
  for (double kappa : {0.1, 1.0, 10.0, 100.0, 800.0}) {
    const double mass = sphere_quadrature(
        [&](const Eigen::Vector3d& d) {
          return vmf_density(UnitVector3::normalized(d), kZHat, kappa);
        },
        1000, 2000);
    CHECK(mass == doctest::Approx(1.0).epsilon(2e-4));
  }
}

TEST_CASE("normal CDF") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_cdf(1.96) == doctest::Approx(0.9750021048517795).epsilon(1e-14));
  // Far lower tail keeps relative accuracy (erfc-based, no 1 - Phi cancellation).
  CHECK(normal_cdf(-8.0) == doctest::Approx(6.220960574271756e-16).epsilon(1e-12));
}

TEST_CASE("projected normal density") {
  // Unit-distance mean, unit variance, evaluated along the mean direction.
  CHECK(pn_density(kZHat, Eigen::Vector3d(0, 0, 1), 1.0) ==
        doctest::Approx(0.3063191872531572).epsilon(1e-12));

  // Integrates to one across near/far regimes, including rho large enough
  // that a naive exp(alpha^2/2) factor would overflow.
  struct Case {
    Eigen::Vector3d mu;
    double sigma2;
    int n_theta;  // sharp peaks need fine polar sampling
    int n_phi;
  };
  for (const Case& c : {Case{{0, 0, 1}, 1.0, 1000, 2000},
                        Case{{0, 0, 5}, 4.0, 1000, 2000},
                        Case{{0.3, -0.2, 0.5}, 0.25, 1000, 2000},
                        Case{{0, 0, 60}, 1.0, 200000, 10}}) {
    const double mass = sphere_quadrature(
        [&](const Eigen::Vector3d& d) {
          return pn_density(UnitVector3::normalized(d), c.mu, c.sigma2);
        },
        c.n_theta, c.n_phi);
    CHECK(mass == doctest::Approx(1.0).epsilon(2e-4));
  }

  // Vanishing mean approaches the uniform density 1/(4 pi).
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    const UnitVector3 f = UnitVector3::normalized(rng.unit3());
    CHECK(std::abs(pn_density(f, Eigen::Vector3d(0, 0, 1e-12), 1.0) - 0.25 / M_PI) <
          1e-12);
  }
  CHECK_THROWS_AS(pn_density(kZHat, Eigen::Vector3d(0, 0, 0), 1.0),
                  DegenerateProjectionError);
}

TEST_CASE("qPN component from a Gaussian") {
  const IsotropicGaussian g(Eigen::Vector3d(0, 0, 2), 1.0, 0.25);
  const VmfComponent c = qpn_from_gaussian(g);
  CHECK(c.concentration == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(c.mean_direction.z() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.weight == 0.25);
  CHECK_THROWS_AS(qpn_from_gaussian(IsotropicGaussian(Eigen::Vector3d(0, 0, 1e-12), 1.0, 1.0)),
                  DegenerateProjectionError);
}

TEST_CASE("qPN approximation fidelity") {
  // Anchors from the published accuracy table for this approximation family,
  // reproduced by the inclusive 1801-node equal-weight polar grid to <2%.
  CHECK(qpn_pn_mae(1.0, 1801) == doctest::Approx(0.00845004251628531).epsilon(0.02));
  CHECK(qpn_pn_mae(5.0, 1801) == doctest::Approx(0.00326021275980349).epsilon(0.02));
  CHECK(qpn_pn_mae(10.0, 1801) == doctest::Approx(0.00171652245632889).epsilon(0.02));

  // Frozen self-consistency values for regression.
  CHECK(qpn_pn_mae(1.0, 1801) == doctest::Approx(0.00843223801140307).epsilon(1e-10));
  CHECK(qpn_pn_mae(5.0, 1801) == doctest::Approx(0.00327880440074981).epsilon(1e-10));

  // Accuracy improves with distance (small ripple tolerated), and stays under
  // 0.01 for all rho >= 1.
  double prev = qpn_pn_mae(1.0, 1801);
  CHECK(prev < 0.01);
  for (int i = 1; i <= 18; ++i) {
    const double rho = 1.0 + 0.5 * i;
    const double mae = qpn_pn_mae(rho, 1801);
    CHECK(mae < 0.01);
    CHECK(mae <= prev * 1.05);
    prev = mae;
  }
}
