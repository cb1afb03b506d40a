#include "nvsense/perturbation.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace nvsense {

namespace {

void check_field(const Constants& constants, double b_mag_mt) {
  constants.validate();
  if (!std::isfinite(b_mag_mt) || b_mag_mt < 0.0) {
    throw std::invalid_argument("field magnitude must be non-negative and finite");
  }
}

void check_away_from_zfs(const Constants& constants, double b_mag_mt) {
  if (std::abs(b_mag_mt - constants.b_zfs_mt()) < kSingularWindowMt) {
    throw SingularFieldError("field magnitude within the singular window around b_zfs");
  }
}

}  // namespace

double LevelTriple::get(int label) const {
  switch (label) {
    case -1: return minus1;
    case 0: return zero;
    case +1: return plus1;
    default: throw std::invalid_argument("label must be one of -1, 0, +1");
  }
}

LevelTriple analytic_omegas(const Constants& constants, double b_mag_mt) {
  check_field(constants, b_mag_mt);
  const double ratio = b_mag_mt / constants.b_zfs_mt();
  LevelTriple t;
  t.minus1 = constants.delta_ghz * (1.0 - ratio);
  t.zero = 0.0;
  t.plus1 = constants.delta_ghz * (1.0 + ratio);
  return t;
}

LevelTriple analytic_kappas(const Constants& constants, double b_mag_mt) {
  check_field(constants, b_mag_mt);
  check_away_from_zfs(constants, b_mag_mt);
  const double d = constants.delta_ghz;
  const double bz = constants.b_zfs_mt();
  const double b = b_mag_mt;
  LevelTriple t;
  t.minus1 = -d * b / (2.0 * (b - bz));
  t.zero = d * b * b / (b * b - bz * bz);
  t.plus1 = -d * b / (2.0 * (b + bz));
  return t;
}

GapExpansion analytic_gap_curvatures(const Constants& constants, double b_mag_mt) {
  check_field(constants, b_mag_mt);
  if (b_mag_mt >= constants.b_zfs_mt()) {
    throw SingularFieldError("gap expansion requires the field below b_zfs");
  }
  check_away_from_zfs(constants, b_mag_mt);

  const LevelTriple omega = analytic_omegas(constants, b_mag_mt);
  const LevelTriple kappa = analytic_kappas(constants, b_mag_mt);
  GapExpansion g;
  g.b_mag_mt = b_mag_mt;
  g.f0_minus_ghz = omega.minus1;
  g.f0_plus_ghz = omega.plus1;
  g.curv_minus_ghz_per_rad2 = kappa.minus1 - kappa.zero;
  g.curv_plus_ghz_per_rad2 = kappa.plus1 - kappa.zero;
  return g;
}

SmallAngleExpansion small_angle_expansion(const Constants& constants, double b_mag_mt) {
  SmallAngleExpansion e;
  e.b_mag_mt = b_mag_mt;
  e.omega_ghz = analytic_omegas(constants, b_mag_mt);
  e.kappa_ghz_per_rad2 = analytic_kappas(constants, b_mag_mt);
  return e;
}

double numerical_curvature(const std::function<double(double)>& f,
                           double theta0,
                           double step_rad,
                           int levels) {
  if (!(step_rad > 0.0) || !std::isfinite(step_rad)) {
    throw std::invalid_argument("step must be positive and finite");
  }
  if (levels < 1 || levels > 8) {
    throw std::invalid_argument("levels must be between 1 and 8");
  }

  // Central second differences at step, step/2, ..., then a Richardson
  // tableau cancelling the h^2, h^4, ... error terms.
  std::vector<double> t(levels);
  const double f0 = f(theta0);
  double h = step_rad;
  for (int k = 0; k < levels; ++k, h *= 0.5) {
    const double fp = f(theta0 + h);
    const double fm = f(theta0 - h);
    if (!std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(f0)) {
      throw std::invalid_argument("function returned a non-finite value");
    }
    t[k] = (fp - 2.0 * f0 + fm) / (h * h);
  }
  double factor = 4.0;
  for (int m = 1; m < levels; ++m, factor *= 4.0) {
    for (int k = levels - 1; k >= m; --k) {
      t[k] = (factor * t[k] - t[k - 1]) / (factor - 1.0);
    }
  }
  return 0.5 * t[levels - 1];
}

double theta2_sensitivity(const Constants& constants, double b_mag_mt) {
  return std::abs(analytic_gap_curvatures(constants, b_mag_mt).curv_minus_ghz_per_rad2);
}

double naive_bz_sensitivity(const Constants& constants, double b_mag_mt) {
  check_field(constants, b_mag_mt);
  return constants.delta_ghz * b_mag_mt / (2.0 * constants.b_zfs_mt());
}

}  // namespace nvsense
