#include "smalign/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Geometry>

#include "smalign/errors.hpp"

namespace smalign {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Pair ratios are bounded in coupled log form. With log Z(x) = x + log W(x)
// for W(x) = (1 - e^{-2x})/x (positive, strictly decreasing, W(0) = 2), a
// pair term becomes
//   log [Z(K)/(Z(ka) Z(kb))] = (K - ka - kb) + log W(K) - log W(ka) - log W(kb)
// where K = sqrt(ka^2 + kb^2 + 2 c ka kb) for the angle cosine c. The excess
// K - ka - kb equals 2 ka kb (c - 1)/(K + ka + kb) <= 0 and decreases in each
// kappa, and the W factors are monotone through K, so every piece attains its
// interval extremum at an endpoint (or K's clamped vertex). Bounding each
// piece separately keeps all terms finite at any concentration scale; a
// numerator-max / denominator-min split instead overflows at exp of the kappa
// interval width, which reaches tens of thousands on fine mixtures. The split
// is exact for degenerate intervals, so bounds still collapse onto f at
// zero-size branches.

// log W(x) = log Z(x) - x; decreasing from log 2 at x = 0. Past 30 the
// e^{-2x} correction is below 1e-26, under an ulp of the -log x part.
double log_w(double x) {
  if (x > 30.0) return -std::log(x);
  return log_z_eval(x) - x;
}

// Combined concentration K(a, b, c) = sqrt(a^2 + b^2 + 2 c a b).
double pair_k(double a, double b, double c) {
  return std::sqrt(std::max(0.0, a * a + b * b + 2.0 * c * a * b));
}

// Interval lower bound on min f over the branch; assumes the branch passed
// the feasibility scan.
double branch_lower_core(const ObjectiveContext& ctx, const BranchRegion& branch) {
  const Eigen::Matrix3d R0t = rotation_matrix(branch.rotation.center).transpose();
  const double psi_r = psi_rot(branch.rotation);
  const double zeta = ctx.zeta();
  const Eigen::Vector3d t0 = branch.translation.center;

  double total = 0.0;
  std::vector<double> klo, khi, lw_lo, lw_hi, lw2, pt, cpt, spt, cps, sps;
  std::vector<Eigen::Vector3d> uhat, q;
  std::vector<char> b_zero;

  for (const auto& cls : ctx.classes()) {
    const std::size_t n1 = cls.mu.size();
    const std::size_t n2 = cls.kappa2.size();
    klo.resize(n1);
    khi.resize(n1);
    lw_lo.resize(n1);
    lw_hi.resize(n1);
    pt.resize(n1);
    cpt.resize(n1);
    spt.resize(n1);
    cps.resize(n1);
    sps.resize(n1);
    uhat.resize(n1);
    b_zero.resize(n1);

    for (std::size_t i = 0; i < n1; ++i) {
      const DistanceInterval d = point_cuboid_distance(branch.translation, cls.mu[i]);
      const double dlo = std::max(d.lo, zeta);
      klo[i] = dlo * dlo / cls.sigma2[i] + 1.0;
      khi[i] = d.hi * d.hi / cls.sigma2[i] + 1.0;
      lw_lo[i] = log_w(klo[i]);
      lw_hi[i] = log_w(khi[i]);
      const Eigen::Vector3d u = cls.mu[i] - t0;
      const double n = u.norm();
      // Degenerate direction only occurs with psi_t = pi, where no angle
      // formula below consults uhat.
      uhat[i] = n > 1e-12 ? Eigen::Vector3d(u / n) : Eigen::Vector3d::UnitX();
      pt[i] = psi_trans(branch.translation, cls.mu[i]);
      cpt[i] = std::cos(pt[i]);
      spt[i] = std::sin(pt[i]);
      const double ps = pt[i] + psi_r;
      b_zero[i] = ps >= M_PI ? 1 : 0;
      if (!b_zero[i]) {
        cps[i] = std::cos(ps);
        sps[i] = std::sin(ps);
      } else {
        cps[i] = -1.0;
        sps[i] = 0.0;
      }
    }
    q.resize(n2);
    lw2.resize(n2);
    for (std::size_t j = 0; j < n2; ++j) {
      q[j] = R0t * (cls.b[j] / cls.kappa2[j]);
      lw2[j] = cls.log_z2[j] - cls.kappa2[j];
    }

    double self_lo = 0.0;
    for (std::size_t i = 0; i < n1; ++i) {
      // Diagonal pair in closed form: Z(2k)/Z(k)^2 = (k/2) coth k, increasing,
      // so its minimum over the branch sits at the lower kappa endpoint.
      self_lo += cls.phi1[i] * cls.phi1[i] * 0.5 * klo[i] / std::tanh(klo[i]);
      for (std::size_t j = i + 1; j < n1; ++j) {
        double cos_a;
        if (pt[i] + pt[j] >= M_PI) {
          cos_a = -1.0;
        } else {
          const double cth = std::clamp(uhat[i].dot(uhat[j]), -1.0, 1.0);
          const double cpp = cpt[i] * cpt[j] - spt[i] * spt[j];
          if (cth <= -cpp) {
            cos_a = -1.0;
          } else {
            const double spp = spt[i] * cpt[j] + cpt[i] * spt[j];
            const double sth = std::sqrt(std::max(0.0, 1.0 - cth * cth));
            cos_a = cth * cpp - sth * spp;
          }
        }
        // Minimized piecewise: the excess K - ka - kb (cancellation-free form
        // 2 ka kb (c-1)/(K+ka+kb), decreasing in each kappa) at the high
        // corner, W(K) at K's box maximum (K is a seminorm in (ka, kb), so a
        // corner), the denominator factors at the low endpoints. Underflow to
        // 0 drops a nonnegative summand, which only lowers the bound.
        const double k_hh = pair_k(khi[i], khi[j], cos_a);
        const double excess_min =
            2.0 * khi[i] * khi[j] * (cos_a - 1.0) / (k_hh + khi[i] + khi[j]);
        const double k_corner_max =
            std::max(std::max(pair_k(klo[i], klo[j], cos_a), pair_k(klo[i], khi[j], cos_a)),
                     std::max(pair_k(khi[i], klo[j], cos_a), k_hh));
        const double log_term =
            excess_min + log_w(k_corner_max) - lw_lo[i] - lw_lo[j];
        self_lo += 2.0 * cls.phi1[i] * cls.phi1[j] * std::exp(log_term);
      }
    }

    double cross_hi = 0.0;
    for (std::size_t i = 0; i < n1; ++i) {
      for (std::size_t j = 0; j < n2; ++j) {
        double cos_b;
        if (b_zero[i]) {
          cos_b = 1.0;
        } else {
          const double cth = std::clamp(uhat[i].dot(q[j]), -1.0, 1.0);
          if (cth >= cps[i]) {
            cos_b = 1.0;
          } else {
            const double sth = std::sqrt(std::max(0.0, 1.0 - cth * cth));
            cos_b = cth * cps[i] + sth * sps[i];
          }
        }
        const double k2 = cls.kappa2[j];
        // Maximized piecewise: the excess at the low endpoint (it decreases
        // in kappa), W(K) at K's interval minimum (K^2 is a convex parabola
        // in kappa with vertex at -c k2), the denominator factor at the high
        // endpoint. Every piece is polynomially sized, so the exp never
        // overflows.
        const double k_at_lo = pair_k(klo[i], k2, cos_b);
        const double excess_max =
            2.0 * klo[i] * k2 * (cos_b - 1.0) / (k_at_lo + klo[i] + k2);
        const double vertex = -cos_b * k2;
        double k_min;
        if (vertex <= klo[i]) {
          k_min = k_at_lo;
        } else if (vertex >= khi[i]) {
          k_min = pair_k(khi[i], k2, cos_b);
        } else {
          k_min = k2 * std::sqrt(std::max(0.0, (1.0 - cos_b) * (1.0 + cos_b)));
        }
        const double log_term =
            excess_max + log_w(k_min) - lw_hi[i] - lw2[j];
        cross_hi += cls.phi1[i] * cls.phi2[j] * std::exp(log_term);
      }
    }

    total += cls.class_weight * (self_lo - 2.0 * cross_hi);
  }
  return total;
}

// Branch center translation nudged out of any standoff ball it violates,
// clamped to the cuboid. Returns false when no feasible point was found.
bool feasible_center(const ObjectiveContext& ctx, const BranchRegion& branch,
                     Eigen::Vector3d* t_out) {
  const auto means = ctx.all_means();
  const double zeta = ctx.zeta();
  const Eigen::Vector3d c = branch.translation.center;
  const Eigen::Vector3d h = branch.translation.half_widths;
  Eigen::Vector3d t = c;
  for (int projection = 0; projection <= 8; ++projection) {
    const Eigen::Vector3d* offender = nullptr;
    for (const auto& mu : means) {
      if ((mu - t).norm() < zeta) {
        offender = &mu;
        break;
      }
    }
    if (offender == nullptr) {
      *t_out = t;
      return true;
    }
    if (projection == 8) break;
    Eigen::Vector3d dir = t - *offender;
    const double n = dir.norm();
    dir = n > 1e-12 ? Eigen::Vector3d(dir / n) : Eigen::Vector3d::UnitX();
    t = *offender + dir * (zeta * (1.0 + 1e-9));
    for (int k = 0; k < 3; ++k) t[k] = std::clamp(t[k], c[k] - h[k], c[k] + h[k]);
  }
  return false;
}

}  // namespace

KappaInterval kappa_interval(const IsotropicGaussian& g, const TranslationCuboid& cuboid,
                             double zeta) {
  const DistanceInterval d = point_cuboid_distance(cuboid, g.mean);
  if (d.hi < zeta) {
    throw InfeasiblePoseError("kappa_interval: cuboid lies inside the standoff ball");
  }
  const double dlo = std::max(d.lo, zeta);
  return {dlo * dlo / g.variance + 1.0, d.hi * d.hi / g.variance + 1.0};
}

double spread_angle_A(const Eigen::Vector3d& mu_i, const Eigen::Vector3d& mu_j,
                      const BranchRegion& branch) {
  const double psi_i = psi_trans(branch.translation, mu_i);
  const double psi_j = psi_trans(branch.translation, mu_j);
  const Eigen::Vector3d ui = mu_i - branch.translation.center;
  const Eigen::Vector3d uj = mu_j - branch.translation.center;
  const double ni = ui.norm();
  const double nj = uj.norm();
  if (ni < 1e-12 || nj < 1e-12) return M_PI;  // psi_trans is already pi there
  const double c = std::clamp(ui.dot(uj) / (ni * nj), -1.0, 1.0);
  return std::min(M_PI, std::acos(c) + psi_i + psi_j);
}

double alignment_angle_B(const Eigen::Vector3d& mu_i, const UnitVector3& image_dir,
                         const BranchRegion& branch) {
  const double psi_i = psi_trans(branch.translation, mu_i);
  const double psi_r = psi_rot(branch.rotation);
  const Eigen::Vector3d ui = mu_i - branch.translation.center;
  const double ni = ui.norm();
  if (ni < 1e-12) return 0.0;  // psi_trans = pi swallows any center angle
  const Eigen::Vector3d q =
      rotation_matrix(branch.rotation.center).transpose() * image_dir.vec();
  const double c = std::clamp(ui.dot(q) / ni, -1.0, 1.0);
  return std::max(0.0, std::acos(c) - psi_i - psi_r);
}

double upper_bound(const ObjectiveContext& ctx, const BranchRegion& branch) {
  const std::optional<Pose> pose = upper_bound_pose(ctx, branch);
  if (!pose) return kInf;
  return objective_value(ctx, *pose);
}

std::optional<Pose> upper_bound_pose(const ObjectiveContext& ctx,
                                     const BranchRegion& branch) {
  Eigen::Vector3d t;
  if (!feasible_center(ctx, branch, &t)) return std::nullopt;
  Pose pose;
  pose.r = branch.rotation.center;
  pose.t = t;
  return pose;
}

double lower_bound(const ObjectiveContext& ctx, const BranchRegion& branch) {
  if (!feasible_wrt_zeta(branch.translation, ctx.all_means(), ctx.zeta())) return kInf;
  return std::max(branch_lower_core(ctx, branch), branch.lower);
}

BoundPair evaluate_bounds(const ObjectiveContext& ctx, const BranchRegion& branch,
                          double skip_upper_at) {
  if (!feasible_wrt_zeta(branch.translation, ctx.all_means(), ctx.zeta())) {
    return {kInf, kInf};
  }
  BoundPair out;
  out.lower = std::max(branch_lower_core(ctx, branch), branch.lower);
  out.upper = out.lower >= skip_upper_at ? kInf : upper_bound(ctx, branch);
  return out;
}

}  // namespace smalign
