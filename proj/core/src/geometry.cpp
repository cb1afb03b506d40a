#include "nvsense/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nvsense {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Keeps grid points strictly inside the region so accessibility never fails
// on the boundary by one rounding step.
constexpr double kCapShrink = 1.0 - 1e-9;

double wrap_azimuth(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  return a;
}

}  // namespace

Eigen::Vector3d SphericalDirection::unit() const {
  const double sp = std::sin(phi_rad);
  return {sp * std::cos(big_theta_rad), sp * std::sin(big_theta_rad), std::cos(phi_rad)};
}

SphericalDirection SphericalDirection::from_unit(const Eigen::Vector3d& u) {
  const double n = u.norm();
  if (!(n > 0.0) || !u.allFinite()) {
    throw std::invalid_argument("direction must be a nonzero finite vector");
  }
  SphericalDirection d;
  d.phi_rad = std::acos(std::clamp(u.z() / n, -1.0, 1.0));
  d.big_theta_rad = wrap_azimuth(std::atan2(u.y(), u.x()));
  return d;
}

void CrystalOrientation::validate(double tol) const {
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol ||
      std::abs(rotation.determinant() - 1.0) > tol) {
    throw std::invalid_argument("orientation must be a proper rotation");
  }
}

CrystalOrientation CrystalOrientation::from_axis_angle(const Eigen::Vector3d& axis,
                                                       double angle_rad) {
  const double n = axis.norm();
  if (!(n > 0.0) || !axis.allFinite() || !std::isfinite(angle_rad)) {
    throw std::invalid_argument("axis must be nonzero and finite");
  }
  CrystalOrientation o;
  o.rotation = Eigen::AngleAxisd(angle_rad, axis / n).toRotationMatrix();
  return o;
}

NvAxisSet nv_axes(const CrystalOrientation& orientation) {
  orientation.validate();
  const double s = 1.0 / std::sqrt(3.0);
  const std::array<Eigen::Vector3d, 4> canonical = {
      Eigen::Vector3d(s, s, s), Eigen::Vector3d(s, -s, -s),
      Eigen::Vector3d(-s, s, -s), Eigen::Vector3d(-s, -s, s)};
  NvAxisSet set;
  for (int i = 0; i < 4; ++i) {
    set.axes[i] = orientation.rotation * canonical[i];
    set.signed_directions[2 * i] = set.axes[i];
    set.signed_directions[2 * i + 1] = -set.axes[i];
  }
  return set;
}

double angle_between(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0) || !a.allFinite() || !b.allFinite()) {
    throw std::invalid_argument("vectors must be nonzero and finite");
  }
  return std::acos(std::clamp(a.dot(b) / (na * nb), -1.0, 1.0));
}

bool is_accessible(const FieldVector& field, const FieldRegion& region) {
  return std::abs(field.bx_mt) <= region.max_xy_mt &&
         std::abs(field.by_mt) <= region.max_xy_mt &&
         std::abs(field.bz_mt) <= region.max_z_mt;
}

double accessible_cap(double b_mag_mt, const FieldRegion& region, double big_theta_rad) {
  if (!(b_mag_mt > 0.0) || !std::isfinite(b_mag_mt) || !std::isfinite(big_theta_rad)) {
    throw std::invalid_argument("field magnitude must be positive and finite");
  }
  const double diag = std::sqrt(2.0 * region.max_xy_mt * region.max_xy_mt +
                                region.max_z_mt * region.max_z_mt);
  if (b_mag_mt > diag) {
    throw AccessibilityError("field magnitude exceeds the region diagonal");
  }

  // The transverse coil limit binds through whichever of |cos|,|sin| of the
  // azimuth is larger; the z limit sets a floor on the polar angle.
  const double m = std::max(std::abs(std::cos(big_theta_rad)), std::abs(std::sin(big_theta_rad)));
  const double sin_cap = region.max_xy_mt / (b_mag_mt * m);
  const double phi_cap = sin_cap >= 1.0 ? 0.5 * kPi : std::asin(sin_cap);
  if (b_mag_mt > region.max_z_mt) {
    const double phi_floor = std::acos(std::clamp(region.max_z_mt / b_mag_mt, -1.0, 1.0));
    if (phi_cap < phi_floor) {
      throw AccessibilityError("no accessible polar angle at this azimuth");
    }
  }
  return phi_cap;
}

std::vector<GridPoint> make_sweep_grid(double b_mag_mt,
                                       const FieldRegion& region,
                                       int n_phi,
                                       int n_theta) {
  if (n_phi < 2 || n_theta < 2) {
    throw std::invalid_argument("grid needs at least 2 points per dimension");
  }

  std::vector<GridPoint> points;
  points.reserve(static_cast<std::size_t>(n_phi) * n_theta);
  for (int j = 0; j < n_theta; ++j) {
    const double big_theta = 2.0 * kPi * j / n_theta;
    const double phi_cap = accessible_cap(b_mag_mt, region, big_theta) * kCapShrink;
    double phi_floor = 0.0;
    if (b_mag_mt > region.max_z_mt) {
      phi_floor = std::acos(std::clamp(region.max_z_mt / b_mag_mt, -1.0, 1.0)) / kCapShrink;
      phi_floor = std::min(phi_floor, phi_cap);
    }
    for (int i = 0; i < n_phi; ++i) {
      GridPoint p;
      p.dir.phi_rad = phi_floor + (phi_cap - phi_floor) * i / (n_phi - 1);
      p.dir.big_theta_rad = big_theta;
      p.field = FieldVector::from_vec(b_mag_mt * p.dir.unit());
      points.push_back(p);
    }
  }
  return points;
}

}  // namespace nvsense
