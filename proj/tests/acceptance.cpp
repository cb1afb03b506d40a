#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "nvsense/experiment.hpp"
#include "oracles.hpp"

// End-to-end acceptance gates for the library: each criterion prints one
// PASS/FAIL line; the exit code is the number of failures.

namespace {

using namespace nvsense;

constexpr double kPi = 3.14159265358979323846;

double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * (values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - lo) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

// One simulated measurement at exact tilt theta: synthesize both dips, add
// noise, detect, fit the lowest dip, return its center.
double measure_center(const Constants& constants, double b_mt, double theta_rad,
                      double sigma, std::uint64_t seed) {
  const LineShape line;
  const HamiltonianMatrix h = build_hamiltonian_planar(constants, 0.0, b_mt, theta_rad);
  const DipSet dips = dip_set(eigendecompose(h), line);
  const double f_start = std::max(0.02, dips.front().center_ghz - 0.1);
  const double f_stop = dips.back().center_ghz + 0.1;
  const int n = static_cast<int>(std::lround((f_stop - f_start) / 0.0025)) + 1;
  Spectrum spectrum = synthesize(dips, line, f_start, f_stop, n);
  if (sigma > 0.0) spectrum = add_noise(spectrum, sigma, seed);
  const std::vector<DipGuess> guesses = detect_dips(spectrum, 0.03);
  if (guesses.empty()) return std::numeric_limits<double>::quiet_NaN();
  const LorentzianFit fit = fit_detected_dip(spectrum, guesses, 0);
  return fit.converged ? fit.center_ghz : std::numeric_limits<double>::quiet_NaN();
}

CrystalOrientation orientation_with_axis_at(double phi_rad, double big_theta_rad,
                                            double spin_rad) {
  const Eigen::Vector3d canonical = Eigen::Vector3d(1, 1, 1).normalized();
  const Eigen::Vector3d target = SphericalDirection{phi_rad, big_theta_rad}.unit();
  CrystalOrientation o;
  o.rotation = (Eigen::AngleAxisd(spin_rad, target) *
                Eigen::Quaterniond::FromTwoVectors(canonical, target))
                   .toRotationMatrix();
  return o;
}

bool criterion_zeeman_linearity(std::string& detail) {
  const Constants constants;
  std::vector<double> fields;
  for (double b = 10.0; b <= 90.0; b += 10.0) fields.push_back(b);

  std::vector<double> centers;
  for (double b : fields) centers.push_back(measure_center(constants, b, 0.0, 0.0, 0));
  const LinearFit clean = fit_linear(fields, centers);
  bool ok = std::abs(clean.x_intercept - 102.5) < 0.5 &&
            std::abs(clean.y_intercept - 2.87) < 0.01;

  std::vector<double> x_err;
  std::vector<double> y_err;
  for (int s = 0; s < 50; ++s) {
    std::vector<double> noisy;
    for (double b : fields) {
      const std::uint64_t seed = mix_seed(mix_seed(1000 + s, b), std::uint64_t{0xACC});
      noisy.push_back(measure_center(constants, b, 0.0, 0.005, seed));
    }
    const LinearFit fit = fit_linear(fields, noisy);
    x_err.push_back(std::abs(fit.x_intercept - 102.5));
    y_err.push_back(std::abs(fit.y_intercept - 2.87));
  }
  const double mx = median(x_err);
  const double my = median(y_err);
  ok = ok && mx < 1.5 && my < 0.02;

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "noiseless x-int %.3f mT y-int %.5f GHz, noisy medians %.3f mT / %.5f GHz",
                clean.x_intercept, clean.y_intercept, mx, my);
  detail = buf;
  return ok;
}

bool criterion_spot_frequencies(std::string& detail) {
  const Constants constants;
  const auto f_minus = [&](double b) {
    const HamiltonianMatrix h = build_hamiltonian_planar(constants, 0.0, b, 0.0);
    return transition_frequencies(eigendecompose(h)).f_minus_ghz;
  };
  const double f20 = f_minus(20.0);
  const double f80 = f_minus(80.0);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "f_minus(20) = %.6f GHz, f_minus(80) = %.6f GHz", f20, f80);
  detail = buf;
  return std::abs(f20 - 2.310) < 1e-3 && std::abs(f80 - 0.630) < 1e-3;
}

bool criterion_expansion_vs_exact(std::string& detail) {
  const Constants constants;
  double worst = 0.0;
  double worst_b = 0.0;
  const auto check = [&](double analytic, double numeric, double b) {
    const double rel = std::abs(numeric - analytic) / std::abs(analytic);
    if (rel > worst) {
      worst = rel;
      worst_b = b;
    }
  };

  for (double b = 5.0; b <= 95.0; b += 5.0) {
    const LevelTriple kappas = analytic_kappas(constants, b);
    for (int label : {-1, 0, +1}) {
      const auto level = [&](double theta) {
        const HamiltonianMatrix h = build_hamiltonian_planar(constants, 0.0, b, theta);
        return eigendecompose(h).value(label);
      };
      check(kappas.get(label), numerical_curvature(level, 0.0, 8e-3, 3), b);
    }
    const GapExpansion gaps = analytic_gap_curvatures(constants, b);
    const auto gap = [&](int label) {
      return [&constants, b, label](double theta) {
        const HamiltonianMatrix h = build_hamiltonian_planar(constants, 0.0, b, theta);
        const TransitionFrequencies tf = transition_frequencies(eigendecompose(h));
        return label < 0 ? tf.f_minus_ghz : tf.f_plus_ghz;
      };
    };
    check(gaps.curv_minus_ghz_per_rad2, numerical_curvature(gap(-1), 0.0, 8e-3, 3), b);
    check(gaps.curv_plus_ghz_per_rad2, numerical_curvature(gap(+1), 0.0, 8e-3, 3), b);
  }

  char buf[96];
  std::snprintf(buf, sizeof(buf), "worst relative error %.3e at %g mT", worst, worst_b);
  detail = buf;
  return worst < 1e-6;
}

bool criterion_sensitivity_divergence(std::string& detail) {
  VirtualSample sample;
  const double axis_phi = 10.0 * kPi / 180.0;
  const double axis_theta = 266.5 * kPi / 180.0;
  sample.orientation = orientation_with_axis_at(axis_phi, axis_theta, 0.0);
  sample.seed = 777;

  OrientationEstimate axis;
  axis.phi_rad = axis_phi;
  axis.big_theta_rad = axis_theta;
  axis.direction = SphericalDirection{axis_phi, axis_theta}.unit();

  const std::vector<double> fields = {20.0, 40.0, 60.0, 80.0, 95.0};
  SensitivityOptions options;
  options.threads = 4;
  const std::vector<FieldSensitivity> measured =
      measure_sensitivity(sample, axis, fields, options);

  bool ok = true;
  double worst = 0.0;
  std::vector<double> c2(fields.size());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (measured[i].skipped) {
      detail = "field " + std::to_string(fields[i]) + " mT produced too few points";
      return false;
    }
    c2[i] = measured[i].fit.c2;
    const double analytic = theta2_sensitivity(sample.constants, fields[i]);
    worst = std::max(worst, std::abs(c2[i] - analytic) / analytic);
  }
  ok = ok && worst < 0.05;

  const double ratio80 = c2[3] / naive_bz_sensitivity(sample.constants, 80.0);
  ok = ok && std::abs(ratio80 - 8.55) < 0.5;
  const double growth = c2[4] / c2[0];
  ok = ok && growth > 70.0;

  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "worst c2 error %.2f%%, ratio(80) = %.3f, sens(95)/sens(20) = %.1f",
                100.0 * worst, ratio80, growth);
  detail = buf;
  return ok;
}

bool criterion_orientation_recovery(std::string& detail) {
  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const std::vector<double> schedule = {20.0, 40.0, 80.0};

  double worst_err = 0.0;
  double worst_polar = 0.0;
  int recovered = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    VirtualSample sample;
    const double big_theta = 2.0 * kPi * uni(rng);
    const double cap = accessible_cap(80.0, sample.region, big_theta);
    const double phi = 0.03 + (cap - 0.07) * uni(rng);
    const double spin = 2.0 * kPi * uni(rng);
    sample.orientation = orientation_with_axis_at(phi, big_theta, spin);
    sample.seed = 40000 + static_cast<std::uint64_t>(t);
    const Eigen::Vector3d target = SphericalDirection{phi, big_theta}.unit();

    const SweepResult sweep = run_angle_sweep(sample, schedule.front(), 13, 24, 4);
    const std::vector<CandidateRegion> candidates = locate_candidate_axes(sweep, 4);
    if (candidates.empty()) continue;

    // Refine the candidate matching the axis placed inside the 80 mT cap.
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      if (angle_between(candidates[i].center.unit(), target) <
          angle_between(candidates[best].center.unit(), target)) {
        best = i;
      }
    }
    RefineOptions options;
    options.threads = 4;
    const OrientationEstimate est =
        refine_axis(sample, candidates[best], schedule, options);

    const double err = angle_between(est.direction, target);
    worst_err = std::max(worst_err, err);
    worst_polar = std::max(worst_polar, est.polar_spread_rad);
    const bool ok = err < 2.0 * kPi / 180.0 && est.polar_spread_rad < 5.0 * kPi / 180.0 &&
                    est.polar_spread_rad < est.azimuthal_spread_rad;
    if (ok) ++recovered;
  }

  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "%d/%d recovered, worst error %.3f deg, worst polar spread %.3f deg",
                recovered, trials, worst_err * 180.0 / kPi, worst_polar * 180.0 / kPi);
  detail = buf;
  return recovered == trials;
}

bool criterion_fitter(std::string& detail) {
  // Noiseless recovery to 1e-8 relative.
  const LineShape line;
  DipSet dips;
  dips.push_back({2.31, 0.12, -1});
  const Spectrum clean = synthesize(dips, line, 2.21, 2.41, 801);
  const LorentzianFit exact = fit_lorentzian(clean, {2.3145, 0.10, 0.012});
  const bool ok_exact = exact.converged && std::abs(exact.center_ghz - 2.31) / 2.31 < 1e-8 &&
                        std::abs(exact.width_ghz - line.width_ghz) / line.width_ghz < 1e-8 &&
                        std::abs(exact.depth - 0.12) / 0.12 < 1e-8 &&
                        std::abs(exact.baseline - 1.0) < 1e-8;

  // Analytic gradient against central differences at random points.
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double worst_grad = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double f = 2.2 + 0.3 * uni(rng);
    const double c = 2.25 + 0.2 * uni(rng);
    const double w = 0.005 + 0.02 * uni(rng);
    const double d = 0.02 + 0.2 * uni(rng);
    const double base = 0.8 + 0.4 * uni(rng);
    const auto grad = lorentzian_gradient(f, c, w, d, base);
    const double params[4] = {c, w, d, base};
    for (int p = 0; p < 4; ++p) {
      const double h = 1e-6 * std::max(1.0, std::abs(params[p]));
      double lo[4] = {c, w, d, base};
      double hi[4] = {c, w, d, base};
      lo[p] -= h;
      hi[p] += h;
      const double fd = (lorentzian_value(f, hi[0], hi[1], hi[2], hi[3]) -
                         lorentzian_value(f, lo[0], lo[1], lo[2], lo[3])) /
                        (2.0 * h);
      // Error measured against the component scale; steep center components
      // reach O(10) and carry matching finite-difference truncation.
      const double scale = std::max({1.0, std::abs(grad[p]), std::abs(fd)});
      worst_grad = std::max(worst_grad, std::abs(fd - grad[p]) / scale);
    }
  }
  const bool ok_grad = worst_grad < 1e-6;

  // Monte Carlo center precision at 0.5% noise.
  std::vector<double> errors;
  for (int s = 0; s < 100; ++s) {
    const Spectrum noisy = add_noise(clean, 0.005, 5000 + s);
    const std::vector<DipGuess> guesses = detect_dips(noisy, 0.03);
    if (guesses.empty()) {
      errors.push_back(1.0);
      continue;
    }
    const LorentzianFit fit = fit_detected_dip(noisy, guesses, 0);
    errors.push_back(std::abs(fit.center_ghz - 2.31));
  }
  const double p95 = quantile(errors, 0.95);
  const bool ok_mc = p95 < 0.0005;

  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "noiseless recovery %s, worst grad rel diff %.2e, MC p95 %.4f MHz",
                ok_exact ? "ok" : "FAILED", worst_grad, p95 * 1e3);
  detail = buf;
  return ok_exact && ok_grad && ok_mc;
}

bool criterion_properties(std::string& detail) {
  std::mt19937_64 rng(314159);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const Constants constants;
  bool ok = true;

  // Hermiticity, trace, theta-parity, rotational invariance of the model.
  for (int k = 0; k < 200 && ok; ++k) {
    const double b = 100.0 * uni(rng);
    const double theta = kPi * uni(rng);
    const double strain = 0.02 * uni(rng);
    const HamiltonianMatrix h = build_hamiltonian_planar(constants, strain, b, theta);
    ok = ok && (h.matrix - h.matrix.adjoint()).norm() < 1e-12;
    ok = ok && std::abs(h.matrix.trace().real() - 2.0 * constants.delta_ghz) < 1e-12;
    ok = ok && std::abs(h.matrix.trace().imag()) < 1e-12;

    const EigenSystem plus = eigendecompose(h);
    const EigenSystem minus =
        eigendecompose(build_hamiltonian_planar(constants, strain, b, -theta));
    for (int label : {-1, 0, +1}) {
      ok = ok && std::abs(plus.value(label) - minus.value(label)) < 1e-10;
    }

    // The vector build must match the planar one in any rotated frame.
    const Eigen::Vector3d rot_axis =
        Eigen::Vector3d(uni(rng) - 0.5, uni(rng) - 0.5, uni(rng) - 0.5).normalized();
    const CrystalOrientation orient =
        CrystalOrientation::from_axis_angle(rot_axis, 2.0 * kPi * uni(rng));
    const Eigen::Vector3d nv_axis = orient.rotation * Eigen::Vector3d(1, 1, 1).normalized();
    const Eigen::Vector3d perp = nv_axis.unitOrthogonal();
    const Eigen::Vector3d field_dir =
        (std::cos(theta) * nv_axis + std::sin(theta) * perp).normalized();
    const HamiltonianMatrix hv = build_hamiltonian_vector(
        constants, strain, FieldVector::from_vec(b * field_dir), nv_axis);
    const EigenSystem ev = eigendecompose(hv);
    for (int label : {-1, 0, +1}) {
      ok = ok && std::abs(ev.value(label) - plus.value(label)) < 1e-9;
    }
  }
  if (!ok) {
    detail = "model property failed";
    return false;
  }

  // Eigen-oracle equivalence on random Hermitian matrices.
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    Eigen::Matrix3cd m;
    for (int r = 0; r < 3; ++r) {
      m(r, r) = gauss(rng);
      for (int c = r + 1; c < 3; ++c) {
        m(r, c) = std::complex<double>(gauss(rng), gauss(rng));
        m(c, r) = std::conj(m(r, c));
      }
    }
    HamiltonianMatrix h;
    h.matrix = m;
    const EigenSystem es = eigendecompose(h);
    std::array<double, 3> sorted = es.values;
    std::sort(sorted.begin(), sorted.end());
    const std::array<double, 3> expected = oracle::hermitian_eigenvalues(m);
    for (int i = 0; i < 3; ++i) {
      worst = std::max(worst, std::abs(sorted[i] - expected[i]));
    }
  }
  ok = worst < 1e-9;

  // Strain splits the zero-field line into two dips 2*strain apart.
  const double strain = 0.015;
  const HamiltonianMatrix h0 = build_hamiltonian_planar(constants, strain, 0.0, 0.0);
  const DipSet dips = dip_set(eigendecompose(h0), LineShape{});
  ok = ok && dips.size() == 2 &&
       std::abs((dips[1].center_ghz - dips[0].center_ghz) - 2.0 * strain) < 1e-9;

  char buf[96];
  std::snprintf(buf, sizeof(buf), "worst oracle deviation %.2e, strain split %.4f GHz",
                worst, dips.size() == 2 ? dips[1].center_ghz - dips[0].center_ghz : -1.0);
  detail = buf;
  return ok;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<bool(std::string&)> run;
  };
  const std::vector<Criterion> criteria = {
      {"Zeeman linearity of the fitted dip location", criterion_zeeman_linearity},
      {"shifted-dip frequencies at 20 and 80 mT", criterion_spot_frequencies},
      {"theta^2 expansion matches exact eigenvalues", criterion_expansion_vs_exact},
      {"measured sensitivity tracks the diverging analytic curve",
       criterion_sensitivity_divergence},
      {"orientation recovery closed loop", criterion_orientation_recovery},
      {"Lorentzian fitter correctness", criterion_fitter},
      {"model property suites and strain splitting", criterion_properties},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = criteria[i].run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %zu. %s (%s) [%.2f s]\n", ok ? "PASS" : "FAIL", i + 1,
                criteria[i].name, detail.c_str(), seconds);
    if (!ok) ++failures;
  }
  std::printf("acceptance: %zu/%zu criteria passed\n", criteria.size() - failures,
              criteria.size());
  return failures;
}
