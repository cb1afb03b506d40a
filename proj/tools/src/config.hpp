#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "nvsense/experiment.hpp"

namespace nvsense::cli {

// Invalid configuration file or flag combination; mapped to the usage exit
// code by main.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SynthParams {
  // NaN start/stop means the scan window is derived from the dip positions.
  double f_start_ghz = std::numeric_limits<double>::quiet_NaN();
  double f_stop_ghz = std::numeric_limits<double>::quiet_NaN();
  int n_points = 0;  // 0 means derive from spacing_ghz
  double spacing_ghz = 0.0025;
};

struct SweepParams {
  double b_mt = 20.0;
  int n_phi = 13;
  int n_theta = 24;
  int k_max = 4;
};

// Fully resolved run configuration: defaults, overlaid by the config file,
// overlaid by explicit flags. sample.constants always mirrors the constants
// section.
struct RunConfig {
  VirtualSample sample;
  SweepParams sweep;
  LocateOptions locate;
  std::vector<double> schedule_mt = {20.0, 40.0, 80.0};
  RefineOptions refine;
  std::vector<double> sensitivity_fields_mt = {20.0, 40.0, 60.0, 80.0, 95.0};
  SensitivityOptions sensitivity;
  // Optional probe-axis override for the sensitivity scan; NaN means use the
  // sample's NV axis closest to +z.
  double axis_phi_rad = std::numeric_limits<double>::quiet_NaN();
  double axis_big_theta_rad = std::numeric_limits<double>::quiet_NaN();
  SynthParams synth;
  double min_prominence = 0.03;
  std::string out_dir = "out";
  std::string format = "tsv";
  int threads = 1;
};

// Strict parse: every key must be known and well-typed, or a ConfigError
// anchored at the offending field is thrown.
void apply_config_json(RunConfig& config, const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

// Canonical serialization of the resolved configuration (sorted keys, the
// orientation as an explicit matrix). Input to the config hash.
nlohmann::json effective_config(const RunConfig& config);
std::string config_hash(const RunConfig& config);

// Final validation after flag overrides: ranges, format name, thread count.
void validate(const RunConfig& config);

}  // namespace nvsense::cli
