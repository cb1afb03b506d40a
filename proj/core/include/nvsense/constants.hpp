#pragma once

#include <stdexcept>

namespace nvsense {

// Bohr magneton over the Planck constant, GHz per mT (CODATA 2018).
inline constexpr double kBohrMagnetonGhzPerMt = 0.01399624493;

// Half-width of the guard band around b_zfs inside which the small-angle
// expansion is treated as singular.
inline constexpr double kSingularWindowMt = 0.1;

// Ground-state constants of the NV- center in frequency units: all energies
// are stored as E/h in GHz, so the zero-field term reads delta*Sz^2 and the
// Zeeman term gyromagnetic*(S.B) with B in mT.
struct Constants {
  double delta_ghz = 2.87;                         // zero-field splitting
  double gyromagnetic_ghz_per_mt = 2.87 / 102.5;   // g*mu_B/h

  // Field magnitude at which the Zeeman shift equals the zero-field
  // splitting; the sensitivity diverges as the field approaches it.
  double b_zfs_mt() const { return delta_ghz / gyromagnetic_ghz_per_mt; }
  double g_factor() const { return gyromagnetic_ghz_per_mt / kBohrMagnetonGhzPerMt; }

  static Constants from_g_factor(double delta_ghz, double g);
  static Constants from_b_zfs(double delta_ghz, double b_zfs_mt);

  void validate() const;
};

// Field magnitude inside the singular guard band around b_zfs, where the
// theta^2 coefficients blow up.
class SingularFieldError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Requested field vector or direction falls outside the coil-limited region.
class AccessibilityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace nvsense
