#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"

namespace nvsense::cli {

// A requested fit (or the axis search feeding one) failed to converge; mapped
// to its own exit code so scripts can retry with different settings.
class FitFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EigArgs {
  double b_mt = 20.0;
  double theta_rad = 0.0;
};

struct ExpandArgs {
  std::vector<double> b_mt;
  double theta_max_rad = 0.5;
  int n_theta = 201;
};

struct SynthArgs {
  double b_mt = 20.0;
  double theta_rad = 0.0;
};

struct FitArgs {
  std::string input_path;
};

int cmd_eig(const RunConfig& config, const EigArgs& args);
int cmd_expand(const RunConfig& config, const ExpandArgs& args);
int cmd_synth(const RunConfig& config, const SynthArgs& args);
int cmd_fit(const RunConfig& config, const FitArgs& args);
int cmd_sweep(const RunConfig& config);
int cmd_locate(const RunConfig& config);
int cmd_refine(const RunConfig& config);
int cmd_sensitivity(const RunConfig& config);

}  // namespace nvsense::cli
