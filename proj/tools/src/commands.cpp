#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <string>

#include "table_io.hpp"

namespace nvsense::cli {
namespace {

constexpr double kPi = 3.14159265358979323846;

TableMetadata base_meta(const RunConfig& config, const std::string& command) {
  TableMetadata meta;
  meta.command = command;
  meta.config_hash = config_hash(config);
  meta.seed = config.sample.seed;
  return meta;
}

void add_meta(TableMetadata& meta, const std::string& key, double value) {
  meta.extra.emplace_back(key, format_number(value));
}

void add_meta(TableMetadata& meta, const std::string& key, const std::string& value) {
  meta.extra.emplace_back(key, value);
}

// File-name tag for a field value: 20 -> b20, 20.5 -> b20p5.
std::string field_tag(double b_mt) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", b_mt);
  std::string tag = buf;
  std::replace(tag.begin(), tag.end(), '.', 'p');
  std::replace(tag.begin(), tag.end(), '-', 'm');
  return "b" + tag;
}

// Symmetric theta grid with exact +-pairs so parity checks see the model, not
// rounding in the grid itself.
std::vector<double> symmetric_grid(double max_rad, int n) {
  std::vector<double> grid(n);
  for (int i = 0; i < n / 2; ++i) {
    const double theta = max_rad * (1.0 - 2.0 * i / (n - 1));
    grid[n - 1 - i] = theta;
    grid[i] = -theta;
  }
  if (n % 2 == 1) grid[n / 2] = 0.0;
  return grid;
}

void reject_singular_window(const Constants& constants, double b_mt) {
  if (std::abs(b_mt - constants.b_zfs_mt()) < kSingularWindowMt) {
    throw SingularFieldError("field magnitude inside the singular window at b_zfs");
  }
}

Spectrum spectrum_from_table(const Table& table) {
  int f_col = 0;
  int s_col = 1;
  if (!table.columns.empty()) {
    const auto find = [&](const std::string& name) {
      for (std::size_t i = 0; i < table.columns.size(); ++i) {
        if (table.columns[i] == name) return static_cast<int>(i);
      }
      return -1;
    };
    f_col = find("frequency_ghz");
    s_col = find("fluorescence");
    if (f_col < 0 || s_col < 0) {
      throw ConfigError("fit: input table needs frequency_ghz and fluorescence columns");
    }
  }
  Spectrum spectrum;
  for (const auto& row : table.rows) {
    if (static_cast<int>(row.size()) <= std::max(f_col, s_col)) {
      throw ConfigError("fit: input row has too few columns");
    }
    spectrum.frequencies_ghz.push_back(row[f_col]);
    spectrum.fluorescence.push_back(row[s_col]);
  }
  if (spectrum.frequencies_ghz.size() < 5) {
    throw ConfigError("fit: input spectrum needs at least 5 samples");
  }
  for (std::size_t i = 1; i < spectrum.frequencies_ghz.size(); ++i) {
    if (!(spectrum.frequencies_ghz[i] > spectrum.frequencies_ghz[i - 1])) {
      throw ConfigError("fit: input frequencies must be strictly increasing");
    }
  }
  return spectrum;
}

Table sweep_table(const TableMetadata& meta, const SweepResult& sweep) {
  Table table;
  table.meta = meta;
  add_meta(table.meta, "b_mt", sweep.b_mag_mt);
  add_meta(table.meta, "n_phi", std::to_string(sweep.n_phi));
  add_meta(table.meta, "n_theta", std::to_string(sweep.n_theta));
  add_meta(table.meta, "flag_codes", "0=ok 1=no_dip 2=fit_failed 3=inaccessible");
  table.columns = {"phi_rad", "big_theta_rad", "depth", "location_ghz", "flag"};
  for (std::size_t i = 0; i < sweep.grid.size(); ++i) {
    table.rows.push_back({sweep.grid[i].phi_rad, sweep.grid[i].big_theta_rad,
                          sweep.depth_map[i], sweep.location_map[i],
                          static_cast<double>(sweep.flags[i])});
  }
  return table;
}

Table candidate_table(const TableMetadata& meta, double b_mt,
                      const std::vector<CandidateRegion>& candidates) {
  Table table;
  table.meta = meta;
  add_meta(table.meta, "b_mt", b_mt);
  table.columns = {"rank",           "phi_rad",          "big_theta_rad", "extent_phi_rad",
                   "extent_theta_rad", "min_location_ghz", "depth"};
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const CandidateRegion& c = candidates[i];
    table.rows.push_back({static_cast<double>(i), c.center.phi_rad, c.center.big_theta_rad,
                          c.extent_phi_rad, c.extent_theta_rad, c.min_location_ghz,
                          c.depth});
  }
  return table;
}

SphericalDirection sensitivity_axis(const RunConfig& config) {
  if (!std::isnan(config.axis_phi_rad)) {
    return {config.axis_phi_rad, config.axis_big_theta_rad};
  }
  // Default probe axis: the signed NV direction closest to +z, where the
  // accessible cap is widest.
  const NvAxisSet axes = nv_axes(config.sample.orientation);
  const Eigen::Vector3d* best = &axes.signed_directions[0];
  for (const Eigen::Vector3d& dir : axes.signed_directions) {
    if (dir.z() > best->z()) best = &dir;
  }
  return SphericalDirection::from_unit(*best);
}

}  // namespace

int cmd_eig(const RunConfig& config, const EigArgs& args) {
  const Constants& constants = config.sample.constants;
  reject_singular_window(constants, args.b_mt);
  const HamiltonianMatrix h = build_hamiltonian_planar(constants, config.sample.strain_ghz,
                                                       args.b_mt, args.theta_rad);
  const EigenSystem es = eigendecompose(h);
  const TransitionFrequencies tf = transition_frequencies(es);

  TableMetadata meta = base_meta(config, "eig");
  Table table;
  table.meta = meta;
  table.columns = {"b_mt",          "theta_rad",       "lambda_plus1_ghz",
                   "lambda_zero_ghz", "lambda_minus1_ghz", "f_minus_ghz",
                   "f_plus_ghz",    "degenerate"};
  table.rows.push_back({args.b_mt, args.theta_rad, es.value(+1), es.value(0), es.value(-1),
                        tf.f_minus_ghz, tf.f_plus_ghz, tf.degenerate ? 1.0 : 0.0});
  const std::string name = write_table(config.out_dir, "eig", config.format, table);
  write_manifest(config.out_dir, meta, {name}, "ok");

  std::printf("eig: b = %g mT, theta = %g rad\n", args.b_mt, args.theta_rad);
  std::printf("  lambda(+1) = %.9f GHz\n", es.value(+1));
  std::printf("  lambda( 0) = %.9f GHz\n", es.value(0));
  std::printf("  lambda(-1) = %.9f GHz\n", es.value(-1));
  std::printf("  f_minus = %.9f GHz, f_plus = %.9f GHz%s\n", tf.f_minus_ghz, tf.f_plus_ghz,
              tf.degenerate ? " (degenerate)" : "");
  return 0;
}

int cmd_expand(const RunConfig& config, const ExpandArgs& args) {
  if (args.b_mt.empty()) {
    throw ConfigError("expand: at least one --b-mt is required");
  }
  if (args.n_theta < 3 || !(args.theta_max_rad > 0.0)) {
    throw ConfigError("expand: need --n-theta >= 3 and --theta-max > 0");
  }
  const Constants& constants = config.sample.constants;
  std::vector<std::string> files;
  TableMetadata meta = base_meta(config, "expand");

  Table kappa;
  kappa.meta = meta;
  kappa.columns = {"b_mt",           "omega_minus1_ghz", "omega_zero_ghz",
                   "omega_plus1_ghz", "kappa_minus1",     "kappa_zero",
                   "kappa_plus1",    "curv_minus",       "curv_plus"};

  const std::vector<double> thetas = symmetric_grid(args.theta_max_rad, args.n_theta);
  for (double b : args.b_mt) {
    const SmallAngleExpansion exp = small_angle_expansion(constants, b);
    const GapExpansion gaps = analytic_gap_curvatures(constants, b);
    kappa.rows.push_back({b, exp.omega_ghz.minus1, exp.omega_ghz.zero, exp.omega_ghz.plus1,
                          exp.kappa_ghz_per_rad2.minus1, exp.kappa_ghz_per_rad2.zero,
                          exp.kappa_ghz_per_rad2.plus1, gaps.curv_minus_ghz_per_rad2,
                          gaps.curv_plus_ghz_per_rad2});

    Table curves;
    curves.meta = meta;
    add_meta(curves.meta, "b_mt", b);
    curves.columns = {"theta_rad",       "lambda_plus1_ghz", "lambda_zero_ghz",
                      "lambda_minus1_ghz", "gap_minus_ghz",    "gap_plus_ghz"};
    for (double theta : thetas) {
      const HamiltonianMatrix h =
          build_hamiltonian_planar(constants, config.sample.strain_ghz, b, theta);
      const EigenSystem es = eigendecompose(h);
      const TransitionFrequencies tf = transition_frequencies(es);
      curves.rows.push_back({theta, es.value(+1), es.value(0), es.value(-1), tf.f_minus_ghz,
                             tf.f_plus_ghz});
    }
    files.push_back(write_table(config.out_dir, "expand_curves_" + field_tag(b),
                                config.format, curves));
  }
  files.push_back(write_table(config.out_dir, "expand_kappa", config.format, kappa));
  write_manifest(config.out_dir, meta, files, "ok");

  std::printf("expand: %zu field(s), %d theta points in [%g, %g] rad\n", args.b_mt.size(),
              args.n_theta, -args.theta_max_rad, args.theta_max_rad);
  return 0;
}

int cmd_synth(const RunConfig& config, const SynthArgs& args) {
  const Constants& constants = config.sample.constants;
  const HamiltonianMatrix h = build_hamiltonian_planar(constants, config.sample.strain_ghz,
                                                       args.b_mt, args.theta_rad);
  const DipSet dips = dip_set(eigendecompose(h), config.sample.line);

  const bool have_start = !std::isnan(config.synth.f_start_ghz);
  const bool have_stop = !std::isnan(config.synth.f_stop_ghz);
  if (have_start != have_stop) {
    throw ConfigError("synth: f_start_ghz and f_stop_ghz must be given together");
  }
  double f_start = config.synth.f_start_ghz;
  double f_stop = config.synth.f_stop_ghz;
  if (!have_start) {
    double lo = dips.front().center_ghz;
    double hi = dips.front().center_ghz;
    for (const Dip& d : dips) {
      lo = std::min(lo, d.center_ghz);
      hi = std::max(hi, d.center_ghz);
    }
    f_start = std::max(0.02, lo - 0.1);
    f_stop = hi + 0.1;
  }
  int n_points = config.synth.n_points;
  if (n_points <= 0) {
    n_points = std::max(5, static_cast<int>(std::lround((f_stop - f_start) /
                                                        config.synth.spacing_ghz)) + 1);
  }

  Spectrum spectrum = synthesize(dips, config.sample.line, f_start, f_stop, n_points);
  spectrum = add_noise(spectrum, config.sample.noise_sigma, config.sample.seed);

  TableMetadata meta = base_meta(config, "synth");
  Table table;
  table.meta = meta;
  add_meta(table.meta, "b_mt", args.b_mt);
  add_meta(table.meta, "theta_rad", args.theta_rad);
  add_meta(table.meta, "strain_ghz", config.sample.strain_ghz);
  add_meta(table.meta, "noise_sigma", config.sample.noise_sigma);
  table.columns = {"frequency_ghz", "fluorescence"};
  for (std::size_t i = 0; i < spectrum.frequencies_ghz.size(); ++i) {
    table.rows.push_back({spectrum.frequencies_ghz[i], spectrum.fluorescence[i]});
  }
  const std::string name = write_table(config.out_dir, "spectrum", config.format, table);
  write_manifest(config.out_dir, meta, {name}, "ok");

  std::printf("synth: %d samples in [%.4f, %.4f] GHz, %zu dip(s)\n", n_points, f_start,
              f_stop, dips.size());
  for (const Dip& d : dips) {
    std::printf("  dip label %+d: center %.6f GHz, depth %.4f\n", d.label, d.center_ghz,
                d.depth);
  }
  return 0;
}

int cmd_fit(const RunConfig& config, const FitArgs& args) {
  const Spectrum spectrum = spectrum_from_table(read_table(args.input_path));
  TableMetadata meta = base_meta(config, "fit");
  add_meta(meta, "input", args.input_path);
  add_meta(meta, "min_prominence", config.min_prominence);

  Table report;
  report.meta = meta;
  report.columns = {"dip_index", "center_ghz",   "width_ghz", "depth",
                    "baseline",  "residual_rms", "converged", "iterations"};

  const std::vector<DipGuess> guesses = detect_dips(spectrum, config.min_prominence);
  if (guesses.empty()) {
    const std::string name = write_table(config.out_dir, "fit_report", "records", report);
    write_manifest(config.out_dir, meta, {name}, "failed", "detect");
    throw FitFailure("fit: no dips detected above the prominence threshold");
  }

  const MultiDipFit fit = fit_dips_joint(spectrum, guesses);
  for (std::size_t i = 0; i < fit.dips.size(); ++i) {
    const LorentzianFit& d = fit.dips[i];
    report.rows.push_back({static_cast<double>(i), d.center_ghz, d.width_ghz, d.depth,
                           fit.baseline, fit.residual_rms, fit.converged ? 1.0 : 0.0,
                           static_cast<double>(fit.iterations)});
  }
  const std::string name = write_table(config.out_dir, "fit_report", "records", report);

  std::printf("fit: %zu dip(s), baseline %.6f, residual rms %.3e, %s in %d iterations\n",
              fit.dips.size(), fit.baseline, fit.residual_rms,
              fit.converged ? "converged" : "NOT converged", fit.iterations);
  for (std::size_t i = 0; i < fit.dips.size(); ++i) {
    std::printf("  dip %zu: center %.6f GHz, fwhm %.6f GHz, depth %.4f\n", i,
                fit.dips[i].center_ghz, fit.dips[i].width_ghz, fit.dips[i].depth);
  }

  if (!fit.converged) {
    write_manifest(config.out_dir, meta, {name}, "failed", "fit");
    throw FitFailure("fit: Levenberg-Marquardt did not converge");
  }
  write_manifest(config.out_dir, meta, {name}, "ok");
  return 0;
}

int cmd_sweep(const RunConfig& config) {
  const SweepResult sweep = run_angle_sweep(config.sample, config.sweep.b_mt,
                                            config.sweep.n_phi, config.sweep.n_theta,
                                            config.threads);
  TableMetadata meta = base_meta(config, "sweep");
  const std::string name =
      write_table(config.out_dir, "sweep_map", config.format, sweep_table(meta, sweep));
  write_manifest(config.out_dir, meta, {name}, "ok");

  int ok = 0;
  double min_loc = std::numeric_limits<double>::infinity();
  std::size_t min_at = 0;
  for (std::size_t i = 0; i < sweep.grid.size(); ++i) {
    if (sweep.flags[i] != PointFlag::ok) continue;
    ++ok;
    if (sweep.location_map[i] < min_loc) {
      min_loc = sweep.location_map[i];
      min_at = i;
    }
  }
  std::printf("sweep: %d/%zu points measurable at %g mT\n", ok, sweep.grid.size(),
              sweep.b_mag_mt);
  if (ok > 0) {
    std::printf("  lowest location %.6f GHz at phi %.4f, big_theta %.4f rad\n", min_loc,
                sweep.grid[min_at].phi_rad, sweep.grid[min_at].big_theta_rad);
  }
  return 0;
}

int cmd_locate(const RunConfig& config) {
  TableMetadata meta = base_meta(config, "locate");
  std::vector<std::string> files;
  std::string stage = "sweep";
  try {
    const SweepResult sweep = run_angle_sweep(config.sample, config.sweep.b_mt,
                                              config.sweep.n_phi, config.sweep.n_theta,
                                              config.threads);
    files.push_back(
        write_table(config.out_dir, "sweep_map", config.format, sweep_table(meta, sweep)));

    stage = "locate";
    const std::vector<CandidateRegion> candidates =
        locate_candidate_axes(sweep, config.sweep.k_max, config.locate);
    files.push_back(write_table(config.out_dir, "candidates", config.format,
                                candidate_table(meta, sweep.b_mag_mt, candidates)));

    std::printf("locate: %zu candidate region(s) at %g mT\n", candidates.size(),
                sweep.b_mag_mt);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      std::printf("  #%zu: phi %.4f, big_theta %.4f rad, location %.6f GHz\n", i,
                  candidates[i].center.phi_rad, candidates[i].center.big_theta_rad,
                  candidates[i].min_location_ghz);
    }
  } catch (...) {
    write_manifest(config.out_dir, meta, files, "failed", stage);
    throw;
  }
  write_manifest(config.out_dir, meta, files, "ok");
  return 0;
}

int cmd_refine(const RunConfig& config) {
  if (config.schedule_mt.empty()) {
    throw ConfigError("refine: schedule_mt must not be empty");
  }
  TableMetadata meta = base_meta(config, "refine");
  std::vector<std::string> files;
  std::string stage = "sweep";

  Table trace;
  trace.meta = meta;
  trace.columns = {"candidate",      "stage",          "b_mt",
                   "phi_rad",        "big_theta_rad",  "window_phi_rad",
                   "window_theta_rad", "spread_phi_rad", "spread_theta_rad"};
  Table estimates;
  estimates.meta = meta;
  estimates.columns = {"candidate",       "phi_rad",          "big_theta_rad",
                       "dir_x",           "dir_y",            "dir_z",
                       "error_bound_rad", "polar_spread_rad", "azimuthal_spread_rad"};

  try {
    const SweepResult sweep = run_angle_sweep(config.sample, config.schedule_mt.front(),
                                              config.sweep.n_phi, config.sweep.n_theta,
                                              config.threads);
    files.push_back(
        write_table(config.out_dir, "sweep_map", config.format, sweep_table(meta, sweep)));

    stage = "locate";
    const std::vector<CandidateRegion> candidates =
        locate_candidate_axes(sweep, config.sweep.k_max, config.locate);
    files.push_back(write_table(config.out_dir, "candidates", config.format,
                                candidate_table(meta, sweep.b_mag_mt, candidates)));
    if (candidates.empty()) {
      throw FitFailure("refine: no candidate axes located");
    }

    stage = "refine";
    RefineOptions options = config.refine;
    options.threads = config.threads;
    std::printf("refine: %zu candidate(s), schedule", candidates.size());
    for (double b : config.schedule_mt) std::printf(" %g", b);
    std::printf(" mT\n");
    std::size_t refined = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      OrientationEstimate est;
      try {
        est = refine_axis(config.sample, candidates[i], config.schedule_mt, options);
      } catch (const AccessibilityError& e) {
        // Axes far from the pole leave the cap as the field ramps; skip them
        // and keep the reachable ones.
        std::printf("  #%zu: skipped (%s)\n", i, e.what());
        continue;
      }
      ++refined;
      for (std::size_t s = 0; s < est.trace.size(); ++s) {
        const RefinementStage& rs = est.trace[s];
        trace.rows.push_back({static_cast<double>(i), static_cast<double>(s), rs.b_mag_mt,
                              rs.center.phi_rad, rs.center.big_theta_rad, rs.window_phi_rad,
                              rs.window_theta_rad, rs.spread_phi_rad, rs.spread_theta_rad});
      }
      estimates.rows.push_back({static_cast<double>(i), est.phi_rad, est.big_theta_rad,
                                est.direction.x(), est.direction.y(), est.direction.z(),
                                est.angular_error_bound_rad, est.polar_spread_rad,
                                est.azimuthal_spread_rad});
      std::printf(
          "  #%zu: phi %.4f, big_theta %.4f rad, bound %.4f rad, spreads %.4f/%.4f rad\n", i,
          est.phi_rad, est.big_theta_rad, est.angular_error_bound_rad, est.polar_spread_rad,
          est.azimuthal_spread_rad);
    }
    if (refined == 0) {
      throw AccessibilityError(
          "refine: no candidate stayed within the accessible cap through the schedule");
    }
  } catch (...) {
    files.push_back(write_table(config.out_dir, "refine_trace", config.format, trace));
    files.push_back(write_table(config.out_dir, "estimates", config.format, estimates));
    write_manifest(config.out_dir, meta, files, "failed", stage);
    throw;
  }
  files.push_back(write_table(config.out_dir, "refine_trace", config.format, trace));
  files.push_back(write_table(config.out_dir, "estimates", config.format, estimates));
  write_manifest(config.out_dir, meta, files, "ok");
  return 0;
}

int cmd_sensitivity(const RunConfig& config) {
  TableMetadata meta = base_meta(config, "sensitivity");
  std::vector<std::string> files;
  std::string stage = "access";

  const SphericalDirection axis_dir = sensitivity_axis(config);
  OrientationEstimate axis;
  axis.direction = axis_dir.unit();
  axis.phi_rad = axis_dir.phi_rad;
  axis.big_theta_rad = axis_dir.big_theta_rad;
  add_meta(meta, "axis_phi_rad", axis.phi_rad);
  add_meta(meta, "axis_big_theta_rad", axis.big_theta_rad);

  try {
    // Surface unreachable magnitudes as accessibility errors before any
    // physics validation sees them.
    for (double b : config.sensitivity_fields_mt) {
      accessible_cap(b, config.sample.region, axis.big_theta_rad);
    }

    stage = "measure";
    SensitivityOptions options = config.sensitivity;
    options.threads = config.threads;
    const std::vector<FieldSensitivity> measured = measure_sensitivity(
        config.sample, axis, config.sensitivity_fields_mt, options);

    stage = "tabulate";
    std::vector<double> c2(measured.size());
    for (std::size_t i = 0; i < measured.size(); ++i) {
      c2[i] = measured[i].skipped ? std::numeric_limits<double>::quiet_NaN()
                                  : measured[i].fit.c2;
    }
    const std::vector<SensitivityRow> rows = sensitivity_table(
        config.sample.constants, config.sensitivity_fields_mt, c2);

    Table table;
    table.meta = meta;
    table.columns = {"b_mt",
                     "measured_ghz_per_rad2",
                     "analytic_ghz_per_rad2",
                     "naive_ghz_per_rad2",
                     "ratio_measured_naive",
                     "singular",
                     "n_points_used",
                     "skipped"};
    for (std::size_t i = 0; i < rows.size(); ++i) {
      table.rows.push_back({rows[i].b_mag_mt, rows[i].measured_ghz_per_rad2,
                            rows[i].analytic_ghz_per_rad2, rows[i].naive_ghz_per_rad2,
                            rows[i].ratio_measured_naive, rows[i].singular ? 1.0 : 0.0,
                            static_cast<double>(measured[i].n_points_used),
                            measured[i].skipped ? 1.0 : 0.0});
    }
    files.push_back(write_table(config.out_dir, "sensitivity", config.format, table));

    std::printf("sensitivity: axis phi %.4f, big_theta %.4f rad\n", axis.phi_rad,
                axis.big_theta_rad);
    std::size_t usable = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (measured[i].skipped) {
        std::printf("  %6.1f mT: skipped (%d accessible points)\n", rows[i].b_mag_mt,
                    measured[i].n_points_used);
        continue;
      }
      ++usable;
      std::printf("  %6.1f mT: measured %10.4f, analytic %10.4f, naive %7.4f, ratio %7.3f\n",
                  rows[i].b_mag_mt, rows[i].measured_ghz_per_rad2,
                  rows[i].analytic_ghz_per_rad2, rows[i].naive_ghz_per_rad2,
                  rows[i].ratio_measured_naive);
    }
    if (usable == 0) {
      write_manifest(config.out_dir, meta, files, "failed", "measure");
      throw FitFailure("sensitivity: no field produced enough accessible points to fit");
    }
  } catch (const FitFailure&) {
    throw;
  } catch (...) {
    write_manifest(config.out_dir, meta, files, "failed", stage);
    throw;
  }
  write_manifest(config.out_dir, meta, files, "ok");
  return 0;
}

}  // namespace nvsense::cli
