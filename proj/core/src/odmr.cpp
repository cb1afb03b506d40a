#include "nvsense/odmr.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace nvsense {

namespace {

void check_line(const LineShape& line) {
  if (!(line.width_ghz > 0.0) || !std::isfinite(line.width_ghz)) {
    throw std::invalid_argument("line width must be positive and finite");
  }
  if (!(line.baseline > 0.0) || !std::isfinite(line.baseline)) {
    throw std::invalid_argument("baseline must be positive and finite");
  }
  if (line.base_contrast < 0.0 || line.base_contrast > 1.0) {
    throw std::invalid_argument("base contrast must lie in [0, 1]");
  }
}

}  // namespace

DipSet dip_set(const EigenSystem& es, const LineShape& line) {
  check_line(line);

  const Eigen::Vector3cd e0 = es.vector(0);
  // |0> population of the optically pumped state; sets how much signal the
  // readout transition can move at all.
  const double overlap0 = std::norm(e0(basis_index(0)));
  const Eigen::Matrix3cd& sx = spin_operators().sx;
  const Eigen::Matrix3cd& sy = spin_operators().sy;

  DipSet dips;
  for (int label : {-1, +1}) {
    const Eigen::Vector3cd et = es.vector(label);
    // Circularly averaged transverse drive: both quadratures contribute, so
    // a strain-split pair (one state coupled by Sx, the other by Sy) keeps
    // both dips. Equals 1 for pure m_s states.
    const double drive = std::clamp(
        std::norm(et.dot(sx * e0)) + std::norm(et.dot(sy * e0)), 0.0, 1.0);
    Dip d;
    d.center_ghz = es.value(label) - es.value(0);
    d.depth = line.base_contrast * overlap0 * drive;
    d.label = label;
    dips.push_back(d);
  }
  std::sort(dips.begin(), dips.end(),
            [](const Dip& a, const Dip& b) { return a.center_ghz < b.center_ghz; });

  if (std::abs(dips[1].center_ghz - dips[0].center_ghz) < 1e-6) {
    Dip merged;
    merged.center_ghz = 0.5 * (dips[0].center_ghz + dips[1].center_ghz);
    merged.depth = dips[0].depth + dips[1].depth;
    merged.label = 0;
    return {merged};
  }
  return dips;
}

Spectrum synthesize(const DipSet& dips,
                    const LineShape& line,
                    double f_start_ghz,
                    double f_stop_ghz,
                    int n_points) {
  check_line(line);
  if (!(f_start_ghz < f_stop_ghz) || !std::isfinite(f_start_ghz) || !std::isfinite(f_stop_ghz)) {
    throw std::invalid_argument("frequency window must be finite and increasing");
  }
  if (n_points < 2) {
    throw std::invalid_argument("spectrum needs at least 2 points");
  }

  const double u = 0.25 * line.width_ghz * line.width_ghz;  // (FWHM/2)^2
  Spectrum s;
  s.frequencies_ghz.resize(n_points);
  s.fluorescence.resize(n_points);
  const double step = (f_stop_ghz - f_start_ghz) / (n_points - 1);
  for (int i = 0; i < n_points; ++i) {
    const double f = f_start_ghz + step * i;
    double absorbed = 0.0;
    for (const Dip& d : dips) {
      const double r = f - d.center_ghz;
      absorbed += d.depth * u / (r * r + u);
    }
    s.frequencies_ghz[i] = f;
    s.fluorescence[i] = line.baseline * (1.0 - absorbed);
  }
  return s;
}

Spectrum add_noise(const Spectrum& spectrum, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("noise sigma must be non-negative and finite");
  }
  Spectrum out = spectrum;
  out.metadata.seed = seed;
  if (sigma == 0.0 || spectrum.fluorescence.empty()) return out;

  const double level =
      *std::max_element(spectrum.fluorescence.begin(), spectrum.fluorescence.end());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma * std::max(level, 1e-300));
  for (double& y : out.fluorescence) y += noise(rng);
  return out;
}

}  // namespace nvsense
