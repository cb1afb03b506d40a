#include "nvsense/constants.hpp"

#include <cmath>

namespace nvsense {

Constants Constants::from_g_factor(double delta_ghz, double g) {
  Constants c;
  c.delta_ghz = delta_ghz;
  c.gyromagnetic_ghz_per_mt = g * kBohrMagnetonGhzPerMt;
  c.validate();
  return c;
}

Constants Constants::from_b_zfs(double delta_ghz, double b_zfs_mt) {
  Constants c;
  c.delta_ghz = delta_ghz;
  if (!(b_zfs_mt > 0.0) || !std::isfinite(b_zfs_mt)) {
    throw std::invalid_argument("b_zfs must be positive and finite");
  }
  c.gyromagnetic_ghz_per_mt = delta_ghz / b_zfs_mt;
  c.validate();
  return c;
}

void Constants::validate() const {
  if (!std::isfinite(delta_ghz) || !(delta_ghz > 0.0)) {
    throw std::invalid_argument("delta must be positive and finite");
  }
  if (!std::isfinite(gyromagnetic_ghz_per_mt) || !(gyromagnetic_ghz_per_mt > 0.0)) {
    throw std::invalid_argument("gyromagnetic ratio must be positive and finite");
  }
}

}  // namespace nvsense
