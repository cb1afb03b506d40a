#pragma once

#include <array>
#include <functional>

#include "nvsense/constants.hpp"

namespace nvsense {

// Values indexed by sublevel label.
struct LevelTriple {
  double minus1 = 0.0;
  double zero = 0.0;
  double plus1 = 0.0;

  double get(int label) const;
};

// Second-order expansion of the eigenvalues around field-axis alignment:
// lambda_i(theta) ~ omega_i + kappa_i * theta^2 for small theta, at fixed
// field magnitude. Valid away from b_zfs.
struct SmallAngleExpansion {
  double b_mag_mt = 0.0;
  LevelTriple omega_ghz;            // aligned-field eigenvalues
  LevelTriple kappa_ghz_per_rad2;   // theta^2 coefficients
};

// Same expansion for the two observable gaps f_minus = lambda_{-1}-lambda_0
// and f_plus = lambda_{+1}-lambda_0. Below b_zfs the minus gap curvature is
// positive and grows without bound as b -> b_zfs.
struct GapExpansion {
  double b_mag_mt = 0.0;
  double f0_minus_ghz = 0.0;
  double f0_plus_ghz = 0.0;
  double curv_minus_ghz_per_rad2 = 0.0;
  double curv_plus_ghz_per_rad2 = 0.0;
};

// Aligned-field eigenvalues: omega_{+-1} = delta*(1 +- b/b_zfs), omega_0 = 0.
LevelTriple analytic_omegas(const Constants& constants, double b_mag_mt);

// kappa_{+-1} = -delta*b / (2*(b +- b_zfs)), kappa_0 = delta*b^2/(b^2 - b_zfs^2),
// both in units of b_zfs. Throws SingularFieldError within the guard band
// around b_zfs.
LevelTriple analytic_kappas(const Constants& constants, double b_mag_mt);

// Requires 0 <= b < b_zfs (minus the guard band).
GapExpansion analytic_gap_curvatures(const Constants& constants, double b_mag_mt);

SmallAngleExpansion small_angle_expansion(const Constants& constants, double b_mag_mt);

// Richardson-extrapolated central second difference of f at theta0, returning
// the theta^2 coefficient (half the second derivative). levels = 1 is the
// plain central difference with the given step; each extra level halves the
// step and cancels the next even-order error term.
double numerical_curvature(const std::function<double(double)>& f,
                           double theta0,
                           double step_rad = 1e-3,
                           int levels = 3);

// |curv_minus|: the figure of merit for angle sensing on the lower gap.
double theta2_sensitivity(const Constants& constants, double b_mag_mt);

// delta*b/(2*b_zfs): the frequency shift per unit angle-squared a plain
// axial-projection model would predict. Finite for all b.
double naive_bz_sensitivity(const Constants& constants, double b_mag_mt);

}  // namespace nvsense
