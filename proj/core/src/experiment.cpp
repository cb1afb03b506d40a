#include "nvsense/experiment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace nvsense {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Salts keeping the noise streams of the pipeline stages disjoint even when
// they revisit the same field point.
constexpr std::uint64_t kSweepSalt = 0x5357454550ULL;   // "SWEEP"
constexpr std::uint64_t kRefineSalt = 0x524546ULL;      // "REF"
constexpr std::uint64_t kSenseSalt = 0x53454e53ULL;     // "SENS"

// Static partition; each index writes only its own output slots, so no
// synchronization is needed beyond join.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  const int usable = std::max(1, threads);
  if (usable == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(usable, n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

double wrap_azimuth(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  return a;
}

// Azimuth difference mapped to (-pi, pi].
double azimuth_delta(double a, double ref) {
  double d = std::fmod(a - ref, 2.0 * kPi);
  if (d <= -kPi) d += 2.0 * kPi;
  if (d > kPi) d -= 2.0 * kPi;
  return d;
}

std::uint64_t point_seed(const VirtualSample& sample, std::uint64_t salt,
                         double b_mag_mt, const SphericalDirection& dir) {
  std::uint64_t s = mix_seed(sample.seed, salt);
  s = mix_seed(s, b_mag_mt);
  s = mix_seed(s, dir.phi_rad);
  s = mix_seed(s, dir.big_theta_rad);
  return s;
}

void check_sample(const VirtualSample& sample) {
  sample.constants.validate();
  sample.orientation.validate();
  if (!(sample.noise_sigma >= 0.0) || !std::isfinite(sample.noise_sigma)) {
    throw std::invalid_argument("noise sigma must be non-negative and finite");
  }
}

void check_below_zfs(const VirtualSample& sample, double b_mag_mt) {
  if (!(b_mag_mt > 0.0) || !std::isfinite(b_mag_mt)) {
    throw std::invalid_argument("field magnitude must be positive and finite");
  }
  if (b_mag_mt >= sample.constants.b_zfs_mt() - kSingularWindowMt) {
    throw SingularFieldError("probe field must stay below the singular window at b_zfs");
  }
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t state, std::uint64_t value) {
  // splitmix64 step over the combined state
  std::uint64_t z = state + 0x9e3779b97f4a7c15ULL * (value + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t mix_seed(std::uint64_t state, double value) {
  return mix_seed(state, std::bit_cast<std::uint64_t>(value));
}

PointMeasurement probe_direction(const VirtualSample& sample,
                                 double b_mag_mt,
                                 const SphericalDirection& dir,
                                 std::uint64_t salt,
                                 double spacing_ghz) {
  check_sample(sample);
  check_below_zfs(sample, b_mag_mt);
  if (!(spacing_ghz > 0.0) || !std::isfinite(spacing_ghz)) {
    throw std::invalid_argument("scan spacing must be positive and finite");
  }

  PointMeasurement out;
  out.location_ghz = kNan;

  const FieldVector field = FieldVector::from_vec(b_mag_mt * dir.unit());
  if (!is_accessible(field, sample.region)) {
    out.flag = PointFlag::inaccessible;
    return out;
  }

  // Only the NV family closest to the field direction is modeled: its dips
  // dominate the monitored low-frequency end of the scan, and the closest
  // signed axis is at most arccos(1/sqrt(3)) away.
  const NvAxisSet axes = nv_axes(sample.orientation);
  const Eigen::Vector3d u = dir.unit();
  const Eigen::Vector3d* nearest = &axes.signed_directions[0];
  double best_dot = -2.0;
  for (const Eigen::Vector3d& d : axes.signed_directions) {
    const double dot = u.dot(d);
    if (dot > best_dot) {
      best_dot = dot;
      nearest = &d;
    }
  }

  const HamiltonianMatrix h =
      build_hamiltonian_vector(sample.constants, sample.strain_ghz, field, *nearest);
  const EigenSystem es = eigendecompose(h);
  const DipSet dips = dip_set(es, sample.line);

  // Scan window covering both aligned-field transitions with margin; the
  // tilt only pushes the gaps further apart within this window.
  const LevelTriple omega = analytic_omegas(sample.constants, b_mag_mt);
  const double f_lo = std::max(0.02, omega.minus1 - 0.1);
  const double f_hi = omega.plus1 + 0.1;
  const int n = static_cast<int>(std::ceil((f_hi - f_lo) / spacing_ghz)) + 1;

  Spectrum clean = synthesize(dips, sample.line, f_lo, f_hi, n);
  clean.metadata.b_mag_mt = b_mag_mt;
  clean.metadata.phi_rad = dir.phi_rad;
  clean.metadata.big_theta_rad = dir.big_theta_rad;
  const Spectrum noisy =
      add_noise(clean, sample.noise_sigma, point_seed(sample, salt, b_mag_mt, dir));

  const std::vector<DipGuess> guesses = detect_dips(noisy, 0.03);
  if (guesses.empty()) {
    out.flag = PointFlag::no_dip;
    return out;
  }

  // The lowest dip tracks the minus gap, the one whose tilt response carries
  // the diverging curvature.
  const LorentzianFit fit = fit_detected_dip(noisy, guesses, 0);
  if (!fit.converged) {
    out.flag = PointFlag::fit_failed;
    return out;
  }
  out.depth = fit.depth;
  out.location_ghz = fit.center_ghz;
  out.flag = PointFlag::ok;
  return out;
}

SweepResult run_angle_sweep(const VirtualSample& sample,
                            double b_mag_mt,
                            int n_phi,
                            int n_theta,
                            int threads) {
  check_sample(sample);
  check_below_zfs(sample, b_mag_mt);

  const std::vector<GridPoint> grid = make_sweep_grid(b_mag_mt, sample.region, n_phi, n_theta);

  SweepResult result;
  result.b_mag_mt = b_mag_mt;
  result.constants = sample.constants;
  result.n_phi = n_phi;
  result.n_theta = n_theta;
  result.grid.resize(grid.size());
  result.depth_map.assign(grid.size(), 0.0);
  result.location_map.assign(grid.size(), kNan);
  result.flags.assign(grid.size(), PointFlag::ok);

  parallel_for(grid.size(), threads, [&](std::size_t i) {
    result.grid[i] = grid[i].dir;
    const PointMeasurement m = probe_direction(sample, b_mag_mt, grid[i].dir, kSweepSalt);
    result.depth_map[i] = m.depth;
    result.location_map[i] = m.location_ghz;
    result.flags[i] = m.flag;
  });
  return result;
}

std::vector<CandidateRegion> locate_candidate_axes(const SweepResult& sweep,
                                                   int k_max,
                                                   const LocateOptions& options) {
  if (k_max < 1) {
    throw std::invalid_argument("k_max must be at least 1");
  }
  const int np = sweep.n_phi;
  const int nt = sweep.n_theta;
  if (np < 2 || nt < 2 ||
      sweep.grid.size() != static_cast<std::size_t>(np) * nt ||
      sweep.location_map.size() != sweep.grid.size() ||
      sweep.depth_map.size() != sweep.grid.size() ||
      sweep.flags.size() != sweep.grid.size()) {
    throw std::invalid_argument("sweep result has inconsistent grid dimensions");
  }

  const auto idx = [&](int j, int i) { return static_cast<std::size_t>(j) * np + i; };
  const auto valid = [&](std::size_t k) { return sweep.flags[k] == PointFlag::ok; };

  double max_depth = 0.0;
  std::vector<double> locations;
  for (std::size_t k = 0; k < sweep.grid.size(); ++k) {
    if (!valid(k)) continue;
    max_depth = std::max(max_depth, sweep.depth_map[k]);
    locations.push_back(sweep.location_map[k]);
  }
  if (locations.empty()) return {};
  std::nth_element(locations.begin(), locations.begin() + locations.size() / 2, locations.end());
  const double median_location = locations[locations.size() / 2];

  // An axis inside the scanned cap drags the monitored dip most of the way
  // from the zero-field line down to the aligned-field gap; a bowl made only
  // of far-off axes does not get close.
  const double delta = sweep.constants.delta_ghz;
  const double aligned = analytic_omegas(sweep.constants, sweep.b_mag_mt).minus1;
  const double location_ceiling = delta - options.min_shift_fraction * (delta - aligned);
  const double depth_floor = options.min_depth_fraction * max_depth;

  struct Minimum {
    std::size_t k;
    double location;
  };
  std::vector<Minimum> minima;
  for (int j = 0; j < nt; ++j) {
    for (int i = 0; i < np; ++i) {
      const std::size_t k = idx(j, i);
      if (!valid(k)) continue;
      const double loc = sweep.location_map[k];
      if (loc > location_ceiling || sweep.depth_map[k] < depth_floor) continue;
      bool is_min = true;
      for (int dj = -1; dj <= 1 && is_min; ++dj) {
        for (int di = -1; di <= 1; ++di) {
          if (di == 0 && dj == 0) continue;
          const int ii = i + di;
          if (ii < 0 || ii >= np) continue;
          const std::size_t kk = idx((j + dj + nt) % nt, ii);
          if (valid(kk) && sweep.location_map[kk] < loc) {
            is_min = false;
            break;
          }
        }
      }
      if (is_min) minima.push_back({k, loc});
    }
  }
  std::sort(minima.begin(), minima.end(),
            [](const Minimum& a, const Minimum& b) { return a.location < b.location; });

  std::vector<CandidateRegion> out;
  for (const Minimum& m : minima) {
    if (static_cast<int>(out.size()) >= k_max) break;
    const Eigen::Vector3d u = sweep.grid[m.k].unit();
    bool suppressed = false;
    for (const CandidateRegion& c : out) {
      if (angle_between(u, c.center.unit()) < options.suppression_radius_rad) {
        suppressed = true;
        break;
      }
    }
    if (suppressed) continue;

    CandidateRegion region;
    region.center = sweep.grid[m.k];
    region.min_location_ghz = m.location;
    region.depth = sweep.depth_map[m.k];

    // Extent of the neighborhood still within a fraction of the bowl depth;
    // this is what the first refinement stage has to cover.
    const double band =
        std::max(options.band_fraction * std::max(median_location - m.location, 0.0), 0.002);
    const double cell_phi = kPi / 2 / (np - 1);
    const double cell_theta = 2.0 * kPi / nt;
    double lo_phi = region.center.phi_rad, hi_phi = region.center.phi_rad;
    double lo_az = 0.0, hi_az = 0.0;
    for (std::size_t k = 0; k < sweep.grid.size(); ++k) {
      if (!valid(k) || sweep.location_map[k] > m.location + band) continue;
      const double dphi = sweep.grid[k].phi_rad - region.center.phi_rad;
      const double daz = azimuth_delta(sweep.grid[k].big_theta_rad, region.center.big_theta_rad);
      // Only the connected bowl matters; skip points of other axes.
      if (std::abs(dphi) > 4.0 * cell_phi + 0.3 || std::abs(daz) > 4.0 * cell_theta + 0.3) continue;
      lo_phi = std::min(lo_phi, sweep.grid[k].phi_rad);
      hi_phi = std::max(hi_phi, sweep.grid[k].phi_rad);
      lo_az = std::min(lo_az, daz);
      hi_az = std::max(hi_az, daz);
    }
    region.extent_phi_rad = hi_phi - lo_phi + cell_phi;
    region.extent_theta_rad = hi_az - lo_az + cell_theta;
    out.push_back(region);
  }
  return out;
}

namespace {

// Probes a phi x theta sub-grid around a center and returns the measurements
// plus the minimizing direction. Inaccessible corners are skipped.
struct SubGridScan {
  std::vector<SphericalDirection> dirs;
  std::vector<PointMeasurement> points;
  std::size_t best = 0;   // index of the location minimum
  int n_ok = 0;
};

SubGridScan scan_window(const VirtualSample& sample, double b_mag_mt,
                        const SphericalDirection& center,
                        double window_phi, double window_theta,
                        int grid_n, std::uint64_t salt, int threads,
                        double spacing_ghz) {
  SubGridScan scan;
  scan.dirs.reserve(static_cast<std::size_t>(grid_n) * grid_n);
  for (int j = 0; j < grid_n; ++j) {
    const double az = center.big_theta_rad +
                      window_theta * (2.0 * j / (grid_n - 1) - 1.0);
    for (int i = 0; i < grid_n; ++i) {
      const double phi = center.phi_rad + window_phi * (2.0 * i / (grid_n - 1) - 1.0);
      if (phi < 0.0 || phi > kPi / 2) continue;
      scan.dirs.push_back({phi, wrap_azimuth(az)});
    }
  }

  scan.points.resize(scan.dirs.size());
  parallel_for(scan.dirs.size(), threads, [&](std::size_t k) {
    scan.points[k] = probe_direction(sample, b_mag_mt, scan.dirs[k],
                                     mix_seed(salt, static_cast<std::uint64_t>(k)),
                                     spacing_ghz);
  });

  double best_loc = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < scan.points.size(); ++k) {
    if (scan.points[k].flag != PointFlag::ok) continue;
    ++scan.n_ok;
    if (scan.points[k].location_ghz < best_loc) {
      best_loc = scan.points[k].location_ghz;
      scan.best = k;
    }
  }
  return scan;
}

}  // namespace

OrientationEstimate refine_axis(const VirtualSample& sample,
                                const CandidateRegion& candidate,
                                const std::vector<double>& schedule_mt,
                                const RefineOptions& options) {
  check_sample(sample);
  if (schedule_mt.empty()) {
    throw std::invalid_argument("refinement schedule must not be empty");
  }
  for (std::size_t i = 0; i < schedule_mt.size(); ++i) {
    check_below_zfs(sample, schedule_mt[i]);
    if (i > 0 && !(schedule_mt[i] > schedule_mt[i - 1])) {
      throw std::invalid_argument("refinement schedule must be strictly increasing");
    }
  }
  if (options.grid_n < 3) {
    throw std::invalid_argument("refinement grid must be at least 3x3");
  }

  SphericalDirection center = candidate.center;
  double window_phi = std::max(0.5 * candidate.extent_phi_rad, options.min_window_rad);
  double window_theta = std::max(0.5 * candidate.extent_theta_rad,
                                 options.min_window_rad / std::max(std::sin(center.phi_rad), 0.05));

  OrientationEstimate est;
  est.refinement_fields_mt = schedule_mt;
  est.angular_error_bound_rad = std::numeric_limits<double>::infinity();

  for (std::size_t stage = 0; stage < schedule_mt.size(); ++stage) {
    const double b = schedule_mt[stage];
    if (accessible_cap(b, sample.region, center.big_theta_rad) < center.phi_rad) {
      throw AccessibilityError("refinement window drifted outside the accessible cap");
    }

    // With the pole inside the window the azimuth is nearly meaningless;
    // scan the full circle instead of a wedge.
    const double eff_window_theta = center.phi_rad <= window_phi ? kPi : window_theta;

    const SubGridScan scan =
        scan_window(sample, b, center, window_phi, eff_window_theta, options.grid_n,
                    mix_seed(kRefineSalt, static_cast<std::uint64_t>(stage)),
                    options.threads, 0.0025);
    if (scan.n_ok < 3) {
      throw AccessibilityError("refinement window has too few measurable points");
    }

    center = scan.dirs[scan.best];
    const double min_loc = scan.points[scan.best].location_ghz;

    // Spread of the near-minimum band, the empirical answer to "which other
    // directions look just as good".
    double lo_phi = center.phi_rad, hi_phi = center.phi_rad;
    double lo_az = 0.0, hi_az = 0.0;
    for (std::size_t k = 0; k < scan.dirs.size(); ++k) {
      if (scan.points[k].flag != PointFlag::ok) continue;
      if (scan.points[k].location_ghz > min_loc + options.spread_band_ghz) continue;
      lo_phi = std::min(lo_phi, scan.dirs[k].phi_rad);
      hi_phi = std::max(hi_phi, scan.dirs[k].phi_rad);
      const double daz = azimuth_delta(scan.dirs[k].big_theta_rad, center.big_theta_rad);
      lo_az = std::min(lo_az, daz);
      hi_az = std::max(hi_az, daz);
    }
    const double cell_phi = 2.0 * window_phi / (options.grid_n - 1);
    const double cell_theta = 2.0 * eff_window_theta / (options.grid_n - 1);

    RefinementStage rs;
    rs.b_mag_mt = b;
    rs.center = center;
    rs.window_phi_rad = window_phi;
    rs.window_theta_rad = eff_window_theta;
    rs.spread_phi_rad = hi_phi - lo_phi + cell_phi;
    rs.spread_theta_rad = hi_az - lo_az + cell_theta;
    est.trace.push_back(rs);

    est.polar_spread_rad = rs.spread_phi_rad;
    est.azimuthal_spread_rad = rs.spread_theta_rad;
    const double bound =
        std::hypot(window_phi, std::sin(center.phi_rad) * eff_window_theta);
    est.angular_error_bound_rad = std::min(est.angular_error_bound_rad, bound);

    window_phi = std::max(options.window_shrink * window_phi, options.min_window_rad);
    window_theta = std::max(options.window_shrink * window_theta,
                            options.min_window_rad / std::max(std::sin(center.phi_rad), 0.05));
  }

  est.direction = center.unit();
  est.phi_rad = center.phi_rad;
  est.big_theta_rad = center.big_theta_rad;
  return est;
}

std::vector<FieldSensitivity> measure_sensitivity(const VirtualSample& sample,
                                                  const OrientationEstimate& axis,
                                                  const std::vector<double>& fields_mt,
                                                  const SensitivityOptions& options) {
  check_sample(sample);
  if (options.n_theta < 5) {
    throw std::invalid_argument("sensitivity scan needs at least 5 tilt angles");
  }
  if (!(options.span_fraction > 0.0) || !(options.max_span_rad > 0.0)) {
    throw std::invalid_argument("sensitivity spans must be positive");
  }

  std::vector<FieldSensitivity> out;
  for (std::size_t fi = 0; fi < fields_mt.size(); ++fi) {
    const double b = fields_mt[fi];
    check_below_zfs(sample, b);

    // The quadratic regime shrinks as the curvature diverges; clip the tilt
    // span so the quartic term stays negligible at every field.
    const GapExpansion gaps = analytic_gap_curvatures(sample.constants, b);
    const double span = std::min(
        options.max_span_rad,
        options.span_fraction * std::sqrt(gaps.f0_minus_ghz /
                                          std::max(gaps.curv_minus_ghz_per_rad2, 1e-9)));

    std::vector<SphericalDirection> dirs(options.n_theta);
    std::vector<PointMeasurement> points(options.n_theta);
    for (int k = 0; k < options.n_theta; ++k) {
      const double tilt = span * (2.0 * k / (options.n_theta - 1) - 1.0);
      dirs[k].phi_rad = axis.phi_rad + tilt;
      dirs[k].big_theta_rad = axis.big_theta_rad;
    }
    const std::uint64_t salt = mix_seed(kSenseSalt, static_cast<std::uint64_t>(fi));
    parallel_for(points.size(), options.threads, [&](std::size_t k) {
      if (dirs[k].phi_rad < 0.0 || dirs[k].phi_rad > kPi / 2) {
        points[k].flag = PointFlag::inaccessible;
        return;
      }
      points[k] = probe_direction(sample, b, dirs[k], mix_seed(salt, k), options.spacing_ghz);
    });

    std::vector<double> tilts;
    std::vector<double> locations;
    for (int k = 0; k < options.n_theta; ++k) {
      if (points[k].flag != PointFlag::ok) continue;
      tilts.push_back(dirs[k].phi_rad - axis.phi_rad);
      locations.push_back(points[k].location_ghz);
    }

    FieldSensitivity fs;
    fs.b_mag_mt = b;
    fs.n_points_used = static_cast<int>(tilts.size());
    if (tilts.size() < 5) {
      fs.skipped = true;
    } else {
      fs.fit = fit_quadratic(tilts, locations);
    }
    out.push_back(fs);
  }
  return out;
}

double ground_truth_error(const OrientationEstimate& estimate, const VirtualSample& sample) {
  const NvAxisSet axes = nv_axes(sample.orientation);
  double best = kPi;
  for (const Eigen::Vector3d& d : axes.signed_directions) {
    best = std::min(best, angle_between(estimate.direction, d));
  }
  return best;
}

}  // namespace nvsense
