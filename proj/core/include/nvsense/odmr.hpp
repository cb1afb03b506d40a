#pragma once

#include <cstdint>
#include <vector>

#include "nvsense/spin_model.hpp"

namespace nvsense {

struct LineShape {
  double width_ghz = 0.010;    // FWHM
  double base_contrast = 0.15; // dip depth at full overlap and saturated drive
  double baseline = 1.0;       // off-resonant fluorescence level
};

struct Dip {
  double center_ghz = 0.0;
  double depth = 0.0;  // fractional, relative to baseline
  int label = 0;       // transition label (-1 or +1), 0 for a merged pair
};

using DipSet = std::vector<Dip>;

// One dip per |0> -> |+-1> transition, centered on the eigenvalue gap.
// Depth = base_contrast * |<e_0|0>|^2 * p_drive with p_drive the clamped
// circular-average transverse drive |<e_t|Sx|e_0>|^2 + |<e_t|Sy|e_0>|^2;
// both factors fade as the field tilts and the eigenstates mix. Dips closer
// than 1e-6 GHz (degenerate gaps) merge into one with summed depth. Sorted
// by center.
DipSet dip_set(const EigenSystem& es, const LineShape& line);

struct SpectrumMetadata {
  double b_mag_mt = 0.0;
  double phi_rad = 0.0;
  double big_theta_rad = 0.0;
  std::uint64_t seed = 0;
};

struct Spectrum {
  std::vector<double> frequencies_ghz;  // strictly increasing
  std::vector<double> fluorescence;
  SpectrumMetadata metadata;
};

// Noiseless Lorentzian dip spectrum on a uniform frequency grid:
// fluor(f) = baseline * (1 - sum_k depth_k * (w/2)^2 / ((f - c_k)^2 + (w/2)^2)).
Spectrum synthesize(const DipSet& dips,
                    const LineShape& line,
                    double f_start_ghz,
                    double f_stop_ghz,
                    int n_points);

// Adds independent Gaussian noise to each sample, standard deviation sigma
// relative to the off-resonant level (taken as the maximum sample).
// Deterministic in (spectrum, sigma, seed).
Spectrum add_noise(const Spectrum& spectrum, double sigma, std::uint64_t seed);

}  // namespace nvsense
