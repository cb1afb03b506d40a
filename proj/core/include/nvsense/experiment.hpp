#pragma once

#include <cstdint>
#include <vector>

#include "nvsense/fitting.hpp"
#include "nvsense/geometry.hpp"
#include "nvsense/odmr.hpp"
#include "nvsense/perturbation.hpp"

namespace nvsense {

// Everything that defines the simulated rig: a crystal in an unknown
// orientation inside the coil region, its optical line parameters, and the
// master seed all measurement noise derives from.
struct VirtualSample {
  CrystalOrientation orientation;
  Constants constants;
  double strain_ghz = 0.0;
  LineShape line;
  double noise_sigma = 0.005;
  std::uint64_t seed = 1;
  FieldRegion region;
};

enum class PointFlag : int { ok = 0, no_dip = 1, fit_failed = 2, inaccessible = 3 };

struct PointMeasurement {
  double depth = 0.0;
  double location_ghz = 0.0;  // fitted center of the lowest detected dip
  PointFlag flag = PointFlag::ok;
};

// One synthetic spectrum at the given field: the nearest signed NV axis sets
// the tilt angle, the lowest detected dip is fitted. salt decorrelates the
// noise stream between pipeline stages; the per-point seed also folds in the
// field coordinates, so results do not depend on evaluation order or thread
// count. spacing_ghz sets the frequency sampling of the scan.
PointMeasurement probe_direction(const VirtualSample& sample,
                                 double b_mag_mt,
                                 const SphericalDirection& dir,
                                 std::uint64_t salt,
                                 double spacing_ghz = 0.0025);

struct SweepResult {
  double b_mag_mt = 0.0;
  Constants constants;
  int n_phi = 0;
  int n_theta = 0;
  std::vector<SphericalDirection> grid;  // azimuth-major, matches make_sweep_grid
  std::vector<double> depth_map;
  std::vector<double> location_map;      // GHz; NaN where flag != ok
  std::vector<PointFlag> flags;
};

// Full spherical sweep at fixed magnitude. Deterministic for a given sample
// and arguments regardless of threads. Requires b below b_zfs.
SweepResult run_angle_sweep(const VirtualSample& sample,
                            double b_mag_mt,
                            int n_phi,
                            int n_theta,
                            int threads = 1);

struct CandidateRegion {
  SphericalDirection center;
  double extent_phi_rad = 0.0;
  double extent_theta_rad = 0.0;
  double min_location_ghz = 0.0;
  double depth = 0.0;
};

struct LocateOptions {
  // A candidate minimum must sit at least this fraction of the way from the
  // zero-field line down to the aligned-field gap; rejects the shallow bowl a
  // sweep sees when every axis is far outside the scanned cap.
  double min_shift_fraction = 0.3;
  double min_depth_fraction = 0.5;    // of the deepest valid point
  double suppression_radius_rad = 0.5;
  double band_fraction = 0.2;         // of (median - min) location, for extents
};

// Local minima of the location map, deepest shift first, at most k_max after
// angular suppression. Empty when no minimum clears the thresholds.
std::vector<CandidateRegion> locate_candidate_axes(const SweepResult& sweep,
                                                   int k_max,
                                                   const LocateOptions& options = {});

struct RefinementStage {
  double b_mag_mt = 0.0;
  SphericalDirection center;
  double window_phi_rad = 0.0;    // half-widths of the scanned window
  double window_theta_rad = 0.0;
  double spread_phi_rad = 0.0;    // extent of the near-minimum band
  double spread_theta_rad = 0.0;
};

struct OrientationEstimate {
  Eigen::Vector3d direction;
  double phi_rad = 0.0;
  double big_theta_rad = 0.0;
  double angular_error_bound_rad = 0.0;  // non-increasing along the schedule
  double polar_spread_rad = 0.0;
  double azimuthal_spread_rad = 0.0;
  std::vector<double> refinement_fields_mt;
  std::vector<RefinementStage> trace;
};

struct RefineOptions {
  int grid_n = 9;                    // per-stage sub-grid is grid_n x grid_n
  double window_shrink = 0.4;
  double min_window_rad = 0.035;     // polar floor, ~2 degrees
  double spread_band_ghz = 0.001;    // location band defining the spreads
  int threads = 1;
};

// Walks the candidate through an increasing field schedule (all below b_zfs),
// re-centering on the location minimum and shrinking the scan window each
// stage. Throws AccessibilityError when the window center leaves the cap.
OrientationEstimate refine_axis(const VirtualSample& sample,
                                const CandidateRegion& candidate,
                                const std::vector<double>& schedule_mt,
                                const RefineOptions& options = {});

struct FieldSensitivity {
  double b_mag_mt = 0.0;
  QuadraticFit fit;       // location vs tilt angle about the estimated axis
  int n_points_used = 0;
  bool skipped = false;   // too few accessible points to fit
};

struct SensitivityOptions {
  // Scan half-span is clipped to span_fraction * sqrt(f0_minus / curvature)
  // so the quadratic model stays unbiased as the curvature diverges.
  double span_fraction = 0.18;
  double max_span_rad = 0.3;
  int n_theta = 61;
  double spacing_ghz = 0.00125;
  int threads = 1;
};

// Tilts the field away from the estimated axis in the polar direction and
// fits location vs angle per scheduled field. fit.c2 is the measured theta^2
// sensitivity. Fields must stay below the singular guard band.
std::vector<FieldSensitivity> measure_sensitivity(const VirtualSample& sample,
                                                  const OrientationEstimate& axis,
                                                  const std::vector<double>& fields_mt,
                                                  const SensitivityOptions& options = {});

// Smallest angle between the estimate and any signed true NV axis.
double ground_truth_error(const OrientationEstimate& estimate, const VirtualSample& sample);

// Stable per-point seed derivation (splitmix64 over the running state).
std::uint64_t mix_seed(std::uint64_t state, std::uint64_t value);
std::uint64_t mix_seed(std::uint64_t state, double value);

}  // namespace nvsense
