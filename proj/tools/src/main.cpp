#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "config.hpp"

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

// Shared options registered on every subcommand; count() distinguishes an
// explicit flag (which overrides the config file) from the default.
struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::string format;
  std::uint64_t seed = 0;
  int threads = 1;
  CLI::Option* config = nullptr;
  CLI::Option* out = nullptr;
  CLI::Option* fmt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  opts.config = cmd->add_option("--config", opts.config_path, "JSON configuration file");
  opts.out = cmd->add_option("--out", opts.out_dir, "output directory");
  opts.fmt = cmd->add_option("--format", opts.format, "output format: tsv or records");
  opts.seed_opt = cmd->add_option("--seed", opts.seed, "master noise seed");
  opts.threads_opt = cmd->add_option("--threads", opts.threads, "sweep parallelism cap");
}

nvsense::cli::RunConfig resolve_config(const CommonOpts& opts) {
  nvsense::cli::RunConfig config;
  if (opts.config->count() > 0) {
    config = nvsense::cli::load_config(opts.config_path);
  }
  if (opts.out->count() > 0) config.out_dir = opts.out_dir;
  if (opts.fmt->count() > 0) config.format = opts.format;
  if (opts.seed_opt->count() > 0) config.sample.seed = opts.seed;
  if (opts.threads_opt->count() > 0) config.threads = opts.threads;
  return config;
}

void apply_grid(const std::string& spec, nvsense::cli::RunConfig& config) {
  int n_phi = 0;
  int n_theta = 0;
  char tail = '\0';
  if (std::sscanf(spec.c_str(), "%dx%d%c", &n_phi, &n_theta, &tail) != 2) {
    throw nvsense::cli::ConfigError("--grid expects PHIxTHETA, e.g. 13x24");
  }
  config.sweep.n_phi = n_phi;
  config.sweep.n_theta = n_theta;
}

// Radian/degree flag pair resolving to radians; the two forms exclude each
// other on the command line.
struct AngleOpts {
  double rad = 0.0;
  double deg = 0.0;
  CLI::Option* rad_opt = nullptr;
  CLI::Option* deg_opt = nullptr;

  void add(CLI::App* cmd, const std::string& stem, const std::string& what) {
    rad_opt = cmd->add_option("--" + stem + "-rad", rad, what + " in radians");
    deg_opt = cmd->add_option("--" + stem + "-deg", deg, what + " in degrees");
    rad_opt->excludes(deg_opt);
    deg_opt->excludes(rad_opt);
  }

  bool given() const { return rad_opt->count() > 0 || deg_opt->count() > 0; }
  double value(double fallback) const {
    if (rad_opt->count() > 0) return rad;
    if (deg_opt->count() > 0) return deg * kDegToRad;
    return fallback;
  }
};

}  // namespace

int main(int argc, char** argv) {
  using namespace nvsense::cli;

  CLI::App app{"NV center ground-state spin model and simulated ODMR pipeline"};
  app.require_subcommand(1);

  CLI::App* eig = app.add_subcommand("eig", "eigenvalues and transition frequencies");
  CommonOpts eig_common;
  add_common(eig, eig_common);
  EigArgs eig_args;
  eig->add_option("--b-mt", eig_args.b_mt, "field magnitude in mT");
  AngleOpts eig_theta;
  eig_theta.add(eig, "theta", "field tilt from the NV axis");

  CLI::App* expand = app.add_subcommand("expand", "eigenvalue curves and theta^2 table");
  CommonOpts expand_common;
  add_common(expand, expand_common);
  ExpandArgs expand_args;
  expand->add_option("--b-mt", expand_args.b_mt, "field magnitudes in mT (repeatable)");
  expand->add_option("--theta-max-rad", expand_args.theta_max_rad, "half-width of the theta grid");
  expand->add_option("--n-theta", expand_args.n_theta, "points across the theta grid");

  CLI::App* synth = app.add_subcommand("synth", "synthesize a noisy ODMR spectrum");
  CommonOpts synth_common;
  add_common(synth, synth_common);
  SynthArgs synth_args;
  synth->add_option("--b-mt", synth_args.b_mt, "field magnitude in mT");
  AngleOpts synth_theta;
  synth_theta.add(synth, "theta", "field tilt from the NV axis");

  CLI::App* fit = app.add_subcommand("fit", "detect and fit dips in a spectrum file");
  CommonOpts fit_common;
  add_common(fit, fit_common);
  FitArgs fit_args;
  fit->add_option("--in", fit_args.input_path, "spectrum file to fit")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* sweep = app.add_subcommand("sweep", "spherical field-direction sweep");
  CommonOpts sweep_common;
  add_common(sweep, sweep_common);
  double sweep_b = 0.0;
  CLI::Option* sweep_b_opt = sweep->add_option("--b-mt", sweep_b, "sweep magnitude in mT");
  std::string sweep_grid;
  CLI::Option* sweep_grid_opt = sweep->add_option("--grid", sweep_grid, "grid as PHIxTHETA");

  CLI::App* locate = app.add_subcommand("locate", "sweep and list candidate NV axes");
  CommonOpts locate_common;
  add_common(locate, locate_common);
  double locate_b = 0.0;
  CLI::Option* locate_b_opt = locate->add_option("--b-mt", locate_b, "sweep magnitude in mT");
  std::string locate_grid;
  CLI::Option* locate_grid_opt = locate->add_option("--grid", locate_grid, "grid as PHIxTHETA");
  int locate_k = 0;
  CLI::Option* locate_k_opt = locate->add_option("--k-max", locate_k, "max candidates");

  CLI::App* refine = app.add_subcommand("refine", "locate then field-ramp refine each axis");
  CommonOpts refine_common;
  add_common(refine, refine_common);
  std::vector<double> refine_schedule;
  CLI::Option* refine_sched_opt =
      refine->add_option("--schedule", refine_schedule, "field schedule in mT (increasing)");
  std::string refine_grid;
  CLI::Option* refine_grid_opt = refine->add_option("--grid", refine_grid, "initial sweep grid");

  CLI::App* sens = app.add_subcommand("sensitivity", "theta^2 sensitivity vs field");
  CommonOpts sens_common;
  add_common(sens, sens_common);
  std::vector<double> sens_fields;
  CLI::Option* sens_fields_opt =
      sens->add_option("--b-mt", sens_fields, "field magnitudes in mT (repeatable)");
  AngleOpts sens_phi;
  sens_phi.add(sens, "axis-phi", "probe axis polar angle");
  AngleOpts sens_theta;
  sens_theta.add(sens, "axis-theta", "probe axis azimuth");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (eig->parsed()) {
      RunConfig config = resolve_config(eig_common);
      validate(config);
      eig_args.theta_rad = eig_theta.value(0.0);
      return cmd_eig(config, eig_args);
    }
    if (expand->parsed()) {
      RunConfig config = resolve_config(expand_common);
      validate(config);
      return cmd_expand(config, expand_args);
    }
    if (synth->parsed()) {
      RunConfig config = resolve_config(synth_common);
      validate(config);
      synth_args.theta_rad = synth_theta.value(0.0);
      return cmd_synth(config, synth_args);
    }
    if (fit->parsed()) {
      RunConfig config = resolve_config(fit_common);
      validate(config);
      return cmd_fit(config, fit_args);
    }
    if (sweep->parsed()) {
      RunConfig config = resolve_config(sweep_common);
      if (sweep_b_opt->count() > 0) config.sweep.b_mt = sweep_b;
      if (sweep_grid_opt->count() > 0) apply_grid(sweep_grid, config);
      validate(config);
      return cmd_sweep(config);
    }
    if (locate->parsed()) {
      RunConfig config = resolve_config(locate_common);
      if (locate_b_opt->count() > 0) config.sweep.b_mt = locate_b;
      if (locate_grid_opt->count() > 0) apply_grid(locate_grid, config);
      if (locate_k_opt->count() > 0) config.sweep.k_max = locate_k;
      validate(config);
      return cmd_locate(config);
    }
    if (refine->parsed()) {
      RunConfig config = resolve_config(refine_common);
      if (refine_sched_opt->count() > 0) config.schedule_mt = refine_schedule;
      if (refine_grid_opt->count() > 0) apply_grid(refine_grid, config);
      validate(config);
      return cmd_refine(config);
    }
    if (sens->parsed()) {
      RunConfig config = resolve_config(sens_common);
      if (sens_fields_opt->count() > 0) config.sensitivity_fields_mt = sens_fields;
      if (sens_phi.given() != sens_theta.given()) {
        throw ConfigError("sensitivity: give both --axis-phi and --axis-theta or neither");
      }
      if (sens_phi.given()) {
        config.axis_phi_rad = sens_phi.value(0.0);
        config.axis_big_theta_rad = sens_theta.value(0.0);
      }
      validate(config);
      return cmd_sensitivity(config);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "nvsense: %s\n", e.what());
    return 2;
  } catch (const FitFailure& e) {
    std::fprintf(stderr, "nvsense: %s\n", e.what());
    return 4;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "nvsense: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "nvsense: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "nvsense: %s\n", e.what());
    return 1;
  }
  return 2;
}
