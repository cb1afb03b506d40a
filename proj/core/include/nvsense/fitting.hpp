#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "nvsense/odmr.hpp"

namespace nvsense {

struct DipGuess {
  double center_ghz = 0.0;
  double depth = 0.0;      // fractional, relative to the estimated baseline
  double width_ghz = 0.0;  // FWHM estimate
};

// Scans for local fluorescence minima deeper than min_prominence (fraction of
// the estimated baseline) after light smoothing. Returns guesses sorted by
// center; empty when nothing clears the threshold.
std::vector<DipGuess> detect_dips(const Spectrum& spectrum, double min_prominence);

struct LorentzianFit {
  double center_ghz = 0.0;
  double width_ghz = 0.0;  // FWHM
  double depth = 0.0;      // fractional
  double baseline = 1.0;
  double residual_rms = 0.0;
  bool converged = false;
  int iterations = 0;
};

// model(f) = baseline * (1 - depth * u / ((f - center)^2 + u)), u = (width/2)^2
double lorentzian_value(double f_ghz, double center_ghz, double width_ghz,
                        double depth, double baseline);

// Partial derivatives of lorentzian_value in the order
// {center, width, depth, baseline}.
std::array<double, 4> lorentzian_gradient(double f_ghz, double center_ghz,
                                          double width_ghz, double depth,
                                          double baseline);

// Levenberg-Marquardt fit of a single dip, restricted to a window of +-10
// guessed widths around the guessed center. The guess must lie inside the
// spectrum span. Non-convergence (iteration budget exhausted, or damping
// saturated without progress) is reported through the converged flag, not an
// exception; a window with fewer than five samples is invalid_argument.
LorentzianFit fit_lorentzian(const Spectrum& spectrum,
                             const DipGuess& guess,
                             int max_iterations = 100,
                             double tol = 1e-10);

// Joint fit of several dips sharing one baseline over the union of their
// windows. Fit results come back in guess order.
struct MultiDipFit {
  std::vector<LorentzianFit> dips;
  double baseline = 1.0;
  double residual_rms = 0.0;
  bool converged = false;
  int iterations = 0;
};

MultiDipFit fit_dips_joint(const Spectrum& spectrum,
                           const std::vector<DipGuess>& guesses,
                           int max_iterations = 100,
                           double tol = 1e-10);

// Fits guesses[index], pulling in any neighboring guesses within three widths
// for a joint fit so overlapping dips do not bias each other.
LorentzianFit fit_detected_dip(const Spectrum& spectrum,
                               const std::vector<DipGuess>& guesses,
                               std::size_t index,
                               int max_iterations = 100,
                               double tol = 1e-10);

struct LinearFit {
  double slope = 0.0;
  double y_intercept = 0.0;
  double x_intercept = 0.0;  // NaN when the slope is zero
  double r_squared = 0.0;
};

LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y);

struct QuadraticFit {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  std::array<double, 3> covariance_diag{};  // residual-scaled, same order
};

// Least-squares parabola; exact (to round-off) on three distinct points.
QuadraticFit fit_quadratic(const std::vector<double>& x, const std::vector<double>& y);

struct SensitivityRow {
  double b_mag_mt = 0.0;
  double measured_ghz_per_rad2 = 0.0;
  double analytic_ghz_per_rad2 = 0.0;  // NaN inside the singular guard band
  double naive_ghz_per_rad2 = 0.0;
  double ratio_measured_naive = 0.0;   // NaN at zero field
  bool singular = false;
};

// Tabulates measured curvatures against the analytic and naive predictions.
// Fields inside the guard band around b_zfs get the singular flag instead of
// an analytic value.
std::vector<SensitivityRow> sensitivity_table(const Constants& constants,
                                              const std::vector<double>& fields_mt,
                                              const std::vector<double>& measured_ghz_per_rad2);

}  // namespace nvsense
