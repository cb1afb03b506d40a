#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "nvsense/constants.hpp"
#include "nvsense/spin_model.hpp"

namespace nvsense {

// Polar angle phi from +z in [0, pi], azimuth big_theta in [0, 2*pi).
struct SphericalDirection {
  double phi_rad = 0.0;
  double big_theta_rad = 0.0;

  Eigen::Vector3d unit() const;
  static SphericalDirection from_unit(const Eigen::Vector3d& u);
};

// Proper rotation carrying the canonical diamond frame into the lab frame.
struct CrystalOrientation {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();

  void validate(double tol = 1e-10) const;
  static CrystalOrientation from_axis_angle(const Eigen::Vector3d& axis, double angle_rad);
};

// The four NV symmetry axes (cube diagonals) and their eight signed
// directions; an NV center responds identically to a field along +-axis.
struct NvAxisSet {
  std::array<Eigen::Vector3d, 4> axes;
  std::array<Eigen::Vector3d, 8> signed_directions;
};

NvAxisSet nv_axes(const CrystalOrientation& orientation);

// Angle in [0, pi] between two nonzero vectors.
double angle_between(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

// Coil limits: |bx|, |by| <= max_xy_mt and |bz| <= max_z_mt.
struct FieldRegion {
  double max_xy_mt = 25.0;
  double max_z_mt = 100.0;
};

bool is_accessible(const FieldVector& field, const FieldRegion& region);

// Largest polar angle reachable at the given magnitude and azimuth, at most
// pi/2. Throws AccessibilityError when no polar angle is reachable there
// (magnitude above the region diagonal, or above max_z with the transverse
// coils unable to make up the difference).
double accessible_cap(double b_mag_mt, const FieldRegion& region, double big_theta_rad);

struct GridPoint {
  SphericalDirection dir;
  FieldVector field;
};

// Azimuth-major sweep grid at fixed magnitude: n_theta equally spaced
// azimuths, and per azimuth n_phi polar angles from the smallest reachable
// value up to the accessible cap. Every emitted field is accessible.
std::vector<GridPoint> make_sweep_grid(double b_mag_mt,
                                       const FieldRegion& region,
                                       int n_phi,
                                       int n_theta);

}  // namespace nvsense
