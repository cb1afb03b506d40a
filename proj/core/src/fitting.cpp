#include "nvsense/fitting.hpp"

#include "nvsense/perturbation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace nvsense {

namespace {

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  }
  return m;
}

void check_spectrum(const Spectrum& s) {
  const std::size_t n = s.frequencies_ghz.size();
  if (n < 5 || s.fluorescence.size() != n) {
    throw std::invalid_argument("spectrum needs at least 5 matched samples");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(s.frequencies_ghz[i] > s.frequencies_ghz[i - 1])) {
      throw std::invalid_argument("spectrum frequencies must be strictly increasing");
    }
  }
}

// Shared-baseline multi-dip model. Parameters are packed as
// [baseline, center_1, width_1, depth_1, center_2, ...].
double multi_dip_value(const std::vector<double>& p, double f) {
  double absorbed = 0.0;
  for (std::size_t k = 1; k + 2 < p.size(); k += 3) {
    const double r = f - p[k];
    const double u = std::max(0.25 * p[k + 1] * p[k + 1], 1e-30);
    absorbed += p[k + 2] * u / (r * r + u);
  }
  return p[0] * (1.0 - absorbed);
}

void multi_dip_gradient(const std::vector<double>& p, double f, std::vector<double>& g) {
  double absorbed = 0.0;
  for (std::size_t k = 1; k < p.size(); k += 3) {
    const double r = f - p[k];
    const double u = std::max(0.25 * p[k + 1] * p[k + 1], 1e-30);
    const double denom = r * r + u;
    const double lorentz = u / denom;
    absorbed += p[k + 2] * lorentz;
    g[k] = -p[0] * p[k + 2] * 2.0 * u * r / (denom * denom);
    g[k + 1] = -p[0] * p[k + 2] * 0.5 * p[k + 1] * r * r / (denom * denom);
    g[k + 2] = -p[0] * lorentz;
  }
  g[0] = 1.0 - absorbed;
}

struct LmOutcome {
  std::vector<double> params;
  double residual_rms = 0.0;
  bool converged = false;
  int iterations = 0;
};

double sum_squares(const std::vector<double>& p,
                   const double* xs, const double* ys, std::size_t n) {
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - multi_dip_value(p, xs[i]);
    sse += r * r;
  }
  return sse;
}

// Levenberg-Marquardt on the multi-dip model with analytic gradients and
// multiplicative damping on the diagonal of the normal matrix. Damping
// saturation and iteration exhaustion both come back as converged = false.
LmOutcome levenberg_marquardt(const double* xs, const double* ys, std::size_t n,
                              std::vector<double> p, int max_iterations, double tol) {
  const int np = static_cast<int>(p.size());
  Eigen::MatrixXd jtj(np, np);
  Eigen::VectorXd jtr(np);
  std::vector<double> g(p.size());

  LmOutcome out;
  double lambda = 1e-3;
  double sse = sum_squares(p, xs, ys, n);
  bool recompute = true;

  for (int iter = 1; iter <= max_iterations; ++iter) {
    out.iterations = iter;
    if (recompute) {
      jtj.setZero();
      jtr.setZero();
      for (std::size_t i = 0; i < n; ++i) {
        multi_dip_gradient(p, xs[i], g);
        const double r = ys[i] - multi_dip_value(p, xs[i]);
        for (int a = 0; a < np; ++a) {
          jtr(a) += g[a] * r;
          for (int b = a; b < np; ++b) jtj(a, b) += g[a] * g[b];
        }
      }
      for (int a = 0; a < np; ++a) {
        for (int b = 0; b < a; ++b) jtj(a, b) = jtj(b, a);
      }
      recompute = false;
    }

    Eigen::MatrixXd damped = jtj;
    for (int a = 0; a < np; ++a) {
      damped(a, a) += lambda * std::max(jtj(a, a), 1e-12);
    }
    const Eigen::VectorXd delta = damped.ldlt().solve(jtr);
    if (!delta.allFinite()) {
      lambda *= 10.0;
      if (lambda > 1e12) break;
      continue;
    }

    std::vector<double> trial = p;
    for (int a = 0; a < np; ++a) trial[a] += delta(a);
    const double trial_sse = sum_squares(trial, xs, ys, n);

    if (std::isfinite(trial_sse) && trial_sse <= sse) {
      double max_rel = 0.0;
      for (int a = 0; a < np; ++a) {
        max_rel = std::max(max_rel, std::abs(delta(a)) / (std::abs(p[a]) + 1e-12));
      }
      p = trial;
      sse = trial_sse;
      lambda = std::max(lambda * 0.1, 1e-12);
      recompute = true;
      if (max_rel < tol) {
        out.converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
  }

  out.params = std::move(p);
  out.residual_rms = std::sqrt(sse / n);
  return out;
}

struct Window {
  std::size_t lo = 0;
  std::size_t hi = 0;  // one past the end
};

Window find_window(const Spectrum& s, double f_lo, double f_hi) {
  const auto& f = s.frequencies_ghz;
  Window w;
  w.lo = std::lower_bound(f.begin(), f.end(), f_lo) - f.begin();
  w.hi = std::upper_bound(f.begin(), f.end(), f_hi) - f.begin();
  return w;
}

void check_guess(const Spectrum& s, const DipGuess& guess) {
  if (!(guess.width_ghz > 0.0) || !std::isfinite(guess.width_ghz)) {
    throw std::invalid_argument("guess width must be positive");
  }
  if (guess.center_ghz < s.frequencies_ghz.front() ||
      guess.center_ghz > s.frequencies_ghz.back()) {
    throw std::invalid_argument("guess center outside the spectrum span");
  }
}

MultiDipFit fit_windowed(const Spectrum& spectrum,
                         const std::vector<DipGuess>& guesses,
                         int max_iterations, double tol) {
  check_spectrum(spectrum);
  if (guesses.empty()) {
    throw std::invalid_argument("need at least one dip guess");
  }
  double f_lo = std::numeric_limits<double>::infinity();
  double f_hi = -std::numeric_limits<double>::infinity();
  for (const DipGuess& g : guesses) {
    check_guess(spectrum, g);
    f_lo = std::min(f_lo, g.center_ghz - 10.0 * g.width_ghz);
    f_hi = std::max(f_hi, g.center_ghz + 10.0 * g.width_ghz);
  }
  const Window w = find_window(spectrum, f_lo, f_hi);
  const std::size_t n = w.hi - w.lo;
  if (n < 5) {
    throw std::invalid_argument("fit window contains fewer than 5 samples");
  }
  const double* xs = spectrum.frequencies_ghz.data() + w.lo;
  const double* ys = spectrum.fluorescence.data() + w.lo;

  std::vector<double> p;
  p.push_back(median(std::vector<double>(ys, ys + n)));
  for (const DipGuess& g : guesses) {
    p.push_back(g.center_ghz);
    p.push_back(g.width_ghz);
    p.push_back(g.depth);
  }

  const LmOutcome lm = levenberg_marquardt(xs, ys, n, std::move(p), max_iterations, tol);

  // A depth collapsed to nothing means the optimizer settled on "no dip
  // here"; report that as a failed fit rather than a converged one.
  bool found_dips = true;
  for (std::size_t k = 0; k < guesses.size(); ++k) {
    if (std::abs(lm.params[3 + 3 * k]) < 0.005) found_dips = false;
  }

  MultiDipFit fit;
  fit.baseline = lm.params[0];
  fit.residual_rms = lm.residual_rms;
  fit.converged = lm.converged && found_dips;
  fit.iterations = lm.iterations;
  for (std::size_t k = 0; k < guesses.size(); ++k) {
    LorentzianFit d;
    d.center_ghz = lm.params[1 + 3 * k];
    d.width_ghz = std::abs(lm.params[2 + 3 * k]);  // model is even in width
    d.depth = lm.params[3 + 3 * k];
    d.baseline = lm.params[0];
    d.residual_rms = lm.residual_rms;
    d.converged = fit.converged;
    d.iterations = lm.iterations;
    fit.dips.push_back(d);
  }
  return fit;
}

}  // namespace

double lorentzian_value(double f_ghz, double center_ghz, double width_ghz,
                        double depth, double baseline) {
  return multi_dip_value({baseline, center_ghz, width_ghz, depth}, f_ghz);
}

std::array<double, 4> lorentzian_gradient(double f_ghz, double center_ghz,
                                          double width_ghz, double depth,
                                          double baseline) {
  std::vector<double> g(4);
  multi_dip_gradient({baseline, center_ghz, width_ghz, depth}, f_ghz, g);
  return {g[1], g[2], g[3], g[0]};
}

std::vector<DipGuess> detect_dips(const Spectrum& spectrum, double min_prominence) {
  check_spectrum(spectrum);
  if (!(min_prominence > 0.0) || !(min_prominence < 1.0)) {
    throw std::invalid_argument("min prominence must lie in (0, 1)");
  }

  const auto& f = spectrum.frequencies_ghz;
  const auto& y = spectrum.fluorescence;
  const std::size_t n = y.size();

  // Boxcar smoothing knocks single-sample noise spikes out of the minimum
  // search without shifting symmetric dips.
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= 2 ? i - 2 : 0;
    const std::size_t hi = std::min(i + 3, n);
    s[i] = std::accumulate(y.begin() + lo, y.begin() + hi, 0.0) / (hi - lo);
  }

  const double baseline = median(y);
  const double threshold = baseline * (1.0 - min_prominence);

  std::vector<DipGuess> guesses;
  std::size_t i = 0;
  while (i < n) {
    if (s[i] >= threshold) {
      ++i;
      continue;
    }
    std::size_t end = i + 1;
    std::size_t gap = 0;
    // Extend the run across short returns above threshold so one dip with a
    // noisy floor does not split in two.
    while (end < n && (s[end] < threshold || gap < 3)) {
      gap = s[end] < threshold ? 0 : gap + 1;
      ++end;
    }
    end -= gap;

    std::size_t imin = i;
    for (std::size_t k = i + 1; k < end; ++k) {
      if (s[k] < s[imin]) imin = k;
    }

    DipGuess g;
    g.center_ghz = f[imin];
    g.depth = (baseline - s[imin]) / baseline;

    const double half_level = 0.5 * (baseline + s[imin]);
    std::size_t l = imin;
    while (l > 0 && s[l - 1] < half_level) --l;
    std::size_t r = imin;
    while (r + 1 < n && s[r + 1] < half_level) ++r;
    const double spacing = (f.back() - f.front()) / (n - 1);
    g.width_ghz = std::max(f[r] - f[l], 2.0 * spacing);
    guesses.push_back(g);
    i = end;
  }
  return guesses;
}

LorentzianFit fit_lorentzian(const Spectrum& spectrum,
                             const DipGuess& guess,
                             int max_iterations,
                             double tol) {
  return fit_windowed(spectrum, {guess}, max_iterations, tol).dips[0];
}

MultiDipFit fit_dips_joint(const Spectrum& spectrum,
                           const std::vector<DipGuess>& guesses,
                           int max_iterations,
                           double tol) {
  return fit_windowed(spectrum, guesses, max_iterations, tol);
}

LorentzianFit fit_detected_dip(const Spectrum& spectrum,
                               const std::vector<DipGuess>& guesses,
                               std::size_t index,
                               int max_iterations,
                               double tol) {
  if (index >= guesses.size()) {
    throw std::invalid_argument("dip index out of range");
  }
  // Neighbors within three widths share the window and get fit jointly; a
  // single-dip model would soak their overlap into its own parameters.
  const auto near = [&](std::size_t a, std::size_t b) {
    const double sep = std::abs(guesses[a].center_ghz - guesses[b].center_ghz);
    return sep < 3.0 * std::max(guesses[a].width_ghz, guesses[b].width_ghz);
  };
  std::size_t lo = index;
  while (lo > 0 && near(lo - 1, lo)) --lo;
  std::size_t hi = index;
  while (hi + 1 < guesses.size() && near(hi, hi + 1)) ++hi;

  const std::vector<DipGuess> group(guesses.begin() + lo, guesses.begin() + hi + 1);
  return fit_windowed(spectrum, group, max_iterations, tol).dips[index - lo];
}

LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) {
    throw std::invalid_argument("linear fit needs at least 2 matched points");
  }
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) {
    throw std::invalid_argument("linear fit needs at least 2 distinct x values");
  }

  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.y_intercept = my - fit.slope * mx;
  fit.x_intercept = fit.slope != 0.0 ? -fit.y_intercept / fit.slope
                                     : std::numeric_limits<double>::quiet_NaN();
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.y_intercept + fit.slope * x[i]);
    ssr += r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  return fit;
}

QuadraticFit fit_quadratic(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 3 || y.size() != n) {
    throw std::invalid_argument("quadratic fit needs at least 3 matched points");
  }
  {
    std::vector<double> d = x;
    std::sort(d.begin(), d.end());
    if (std::unique(d.begin(), d.end()) - d.begin() < 3) {
      throw std::invalid_argument("quadratic fit needs at least 3 distinct x values");
    }
  }

  // Column scaling keeps the normal equations well conditioned when x spans
  // very different magnitudes (mT fields vs radian tilts).
  Eigen::MatrixXd a(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = x[i];
    a(i, 2) = x[i] * x[i];
  }
  Eigen::Vector3d scale;
  for (int c = 0; c < 3; ++c) scale(c) = std::max(a.col(c).cwiseAbs().maxCoeff(), 1e-300);
  Eigen::MatrixXd as = a * scale.cwiseInverse().asDiagonal();
  Eigen::Map<const Eigen::VectorXd> b(y.data(), n);
  const Eigen::Vector3d coef_scaled = as.colPivHouseholderQr().solve(b);
  const Eigen::Vector3d coef = coef_scaled.cwiseQuotient(scale);

  QuadraticFit fit;
  fit.c0 = coef(0);
  fit.c1 = coef(1);
  fit.c2 = coef(2);

  const double sse = (a * coef - b).squaredNorm();
  const double variance = n > 3 ? sse / (n - 3) : 0.0;
  const Eigen::Matrix3d gram_inv = (as.transpose() * as).ldlt().solve(Eigen::Matrix3d::Identity());
  for (int c = 0; c < 3; ++c) {
    fit.covariance_diag[c] = variance * gram_inv(c, c) / (scale(c) * scale(c));
  }
  return fit;
}

std::vector<SensitivityRow> sensitivity_table(const Constants& constants,
                                              const std::vector<double>& fields_mt,
                                              const std::vector<double>& measured_ghz_per_rad2) {
  if (fields_mt.size() != measured_ghz_per_rad2.size()) {
    throw std::invalid_argument("fields and measurements must have equal length");
  }
  std::vector<SensitivityRow> rows;
  rows.reserve(fields_mt.size());
  for (std::size_t i = 0; i < fields_mt.size(); ++i) {
    SensitivityRow row;
    row.b_mag_mt = fields_mt[i];
    row.measured_ghz_per_rad2 = measured_ghz_per_rad2[i];
    row.naive_ghz_per_rad2 = naive_bz_sensitivity(constants, fields_mt[i]);
    try {
      row.analytic_ghz_per_rad2 = theta2_sensitivity(constants, fields_mt[i]);
    } catch (const SingularFieldError&) {
      row.analytic_ghz_per_rad2 = std::numeric_limits<double>::quiet_NaN();
      row.singular = true;
    }
    row.ratio_measured_naive = row.naive_ghz_per_rad2 > 0.0
        ? row.measured_ghz_per_rad2 / row.naive_ghz_per_rad2
        : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);
  }
  return rows;
}

}  // namespace nvsense
