#pragma once

#include <Eigen/Core>

#include "smalign/unit_vector.hpp"

namespace smalign {

// Isotropic 3D Gaussian with scalar variance.
struct IsotropicGaussian {
  Eigen::Vector3d mean;
  double variance;  // sigma^2, > 0
  double weight;    // phi, >= 0

  IsotropicGaussian(const Eigen::Vector3d& mean_, double variance_, double weight_);
};

// von Mises-Fisher component on the unit sphere.
struct VmfComponent {
  UnitVector3 mean_direction;
  double concentration;  // kappa, > 0
  double weight;         // phi, >= 0

  VmfComponent(const UnitVector3& mean_direction_, double concentration_, double weight_);
};

// Scaled vMF normalizer Z(kappa) = (e^kappa - e^-kappa) / kappa, continuously
// extended to Z(0) = 2. The vMF density is exp(kappa mu.f) / (2 pi Z(kappa)).
// Overflows to +inf for kappa > ~709; use log_z_eval beyond that.
double z_eval(double kappa);

// log Z(kappa), stable for all kappa >= 0 (log-domain identity
// kappa + log1p(-e^{-2 kappa}) - log kappa once kappa is large).
double log_z_eval(double kappa);

// d/dkappa log Z(kappa) = coth(kappa) - 1/kappa, the mean resultant length of
// a vMF with concentration kappa. Continuous at 0 with value 0.
double log_z_deriv(double kappa);

// vMF density at unit direction f.
double vmf_density(const UnitVector3& f, const UnitVector3& mu, double kappa);

// Standard normal CDF via erfc (accurate in the far lower tail).
double normal_cdf(double x);

// Density at unit direction f of the image of N(mu, sigma2 I) under central
// projection onto the sphere. Requires |mu| > 0.
double pn_density(const UnitVector3& f, const Eigen::Vector3d& mu, double sigma2);

// Best vMF approximation of the projected Gaussian: direction mu/|mu|,
// concentration (|mu|/sigma)^2 + 1. Throws DegenerateProjectionError when
// |mu| <= tol (no preferred direction). Weight is carried through unchanged.
VmfComponent qpn_from_gaussian(const IsotropicGaussian& g, double degenerate_tol = 1e-9);

// Mean absolute error between the vMF approximation and the exact projected
// density over an inclusive uniform polar-angle grid on [0, pi], for a
// Gaussian at distance rho (in units of its standard deviation) from the
// camera. Scale-invariant: depends only on rho.
double qpn_pn_mae(double rho, int n_nodes);

}  // namespace smalign
