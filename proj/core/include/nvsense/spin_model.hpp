#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>

#include "nvsense/constants.hpp"

namespace nvsense {

// Spin-1 operators in the {|+1>, |0>, |-1>} basis. Component index 0 is
// m_s = +1, index 1 is m_s = 0, index 2 is m_s = -1.
struct Spin1Operators {
  Eigen::Matrix3cd sx;
  Eigen::Matrix3cd sy;
  Eigen::Matrix3cd sz;
};

const Spin1Operators& spin_operators();

// Index of a magnetic sublevel label {-1, 0, +1} in the storage basis.
inline int basis_index(int label) { return 1 - label; }

struct FieldVector {
  double bx_mt = 0.0;
  double by_mt = 0.0;
  double bz_mt = 0.0;

  double magnitude_mt() const;
  Eigen::Vector3d vec() const { return {bx_mt, by_mt, bz_mt}; }
  static FieldVector from_vec(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
};

// Parameters reduced to the NV frame. Vector builds record the equivalent
// planar pair (b_mag, theta).
struct HamiltonianParams {
  Constants constants;
  double strain_ghz = 0.0;
  double b_mag_mt = 0.0;
  double theta_rad = 0.0;
};

struct HamiltonianMatrix {
  Eigen::Matrix3cd matrix;  // GHz, Hermitian
  HamiltonianParams params;
};

// H = delta*Sz^2 + strain*(Sx^2 - Sy^2) + gyro*b*(sin(theta)*Sy + cos(theta)*Sz),
// with theta the angle between the field and the NV symmetry axis and the
// transverse field component placed along y.
HamiltonianMatrix build_hamiltonian_planar(const Constants& constants,
                                           double strain_ghz,
                                           double b_mag_mt,
                                           double theta_rad);

// Same Hamiltonian for an arbitrary lab-frame field and NV axis (unit length
// within 1e-9). The strain axes are tied to the NV transverse frame spanned
// by the axis and the field, so the result equals the planar build with
// b_mag = |field| and theta = angle(field, axis).
HamiltonianMatrix build_hamiltonian_vector(const Constants& constants,
                                           double strain_ghz,
                                           const FieldVector& field,
                                           const Eigen::Vector3d& nv_axis);

struct EigenSystem {
  std::array<double, 3> values{};  // eigenvalues in GHz, solver order
  Eigen::Matrix3cd vectors;        // orthonormal eigenvectors as columns
  std::array<int, 3> labels{};     // adiabatic label in {-1, 0, +1} per column
  bool degenerate = false;

  double value(int label) const;
  Eigen::Vector3cd vector(int label) const;
};

// Exact diagonalization with adiabatic labeling: each eigenvector keeps the
// label of the basis state it overlaps most (labels assigned as the
// permutation maximizing total overlap, so they stay a bijection even when
// states mix strongly). degenerate is set when two eigenvalues are closer
// than degeneracy_tol_ghz.
EigenSystem eigendecompose(const HamiltonianMatrix& h, double degeneracy_tol_ghz = 1e-6);

struct TransitionFrequencies {
  double f_minus_ghz = 0.0;  // label -1 minus label 0
  double f_plus_ghz = 0.0;   // label +1 minus label 0
  bool degenerate = false;
};

TransitionFrequencies transition_frequencies(const EigenSystem& es);

}  // namespace nvsense
