#include "nvsense/spin_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nvsense {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752;

Spin1Operators make_operators() {
  using C = std::complex<double>;
  Spin1Operators ops;
  ops.sx << 0, kInvSqrt2, 0,
            kInvSqrt2, 0, kInvSqrt2,
            0, kInvSqrt2, 0;
  ops.sy << C(0, 0), C(0, -kInvSqrt2), C(0, 0),
            C(0, kInvSqrt2), C(0, 0), C(0, -kInvSqrt2),
            C(0, 0), C(0, kInvSqrt2), C(0, 0);
  ops.sz << 1, 0, 0,
            0, 0, 0,
            0, 0, -1;
  return ops;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be finite");
  }
}

}  // namespace

const Spin1Operators& spin_operators() {
  static const Spin1Operators ops = make_operators();
  return ops;
}

double FieldVector::magnitude_mt() const {
  return std::sqrt(bx_mt * bx_mt + by_mt * by_mt + bz_mt * bz_mt);
}

HamiltonianMatrix build_hamiltonian_planar(const Constants& constants,
                                           double strain_ghz,
                                           double b_mag_mt,
                                           double theta_rad) {
  constants.validate();
  check_finite(strain_ghz, "strain");
  check_finite(b_mag_mt, "field magnitude");
  check_finite(theta_rad, "theta");
  if (b_mag_mt < 0.0) {
    throw std::invalid_argument("field magnitude must be non-negative");
  }
  if (strain_ghz < 0.0) {
    throw std::invalid_argument("strain must be non-negative");
  }

  const Spin1Operators& s = spin_operators();
  const double zeeman = constants.gyromagnetic_ghz_per_mt * b_mag_mt;

  HamiltonianMatrix h;
  h.matrix = constants.delta_ghz * (s.sz * s.sz)
           + strain_ghz * (s.sx * s.sx - s.sy * s.sy)
           + zeeman * (std::sin(theta_rad) * s.sy + std::cos(theta_rad) * s.sz);
  h.params = {constants, strain_ghz, b_mag_mt, theta_rad};
  return h;
}

HamiltonianMatrix build_hamiltonian_vector(const Constants& constants,
                                           double strain_ghz,
                                           const FieldVector& field,
                                           const Eigen::Vector3d& nv_axis) {
  const double axis_norm = nv_axis.norm();
  if (std::abs(axis_norm - 1.0) > 1e-9) {
    throw std::invalid_argument("NV axis must be unit length");
  }
  const Eigen::Vector3d b = field.vec();
  if (!b.allFinite()) {
    throw std::invalid_argument("field components must be finite");
  }

  const double b_mag = b.norm();
  double theta = 0.0;
  if (b_mag > 0.0) {
    const double cos_t = std::clamp(b.dot(nv_axis) / b_mag, -1.0, 1.0);
    theta = std::acos(cos_t);
  }
  return build_hamiltonian_planar(constants, strain_ghz, b_mag, theta);
}

double EigenSystem::value(int label) const {
  for (int k = 0; k < 3; ++k) {
    if (labels[k] == label) return values[k];
  }
  throw std::invalid_argument("label must be one of -1, 0, +1");
}

Eigen::Vector3cd EigenSystem::vector(int label) const {
  for (int k = 0; k < 3; ++k) {
    if (labels[k] == label) return vectors.col(k);
  }
  throw std::invalid_argument("label must be one of -1, 0, +1");
}

EigenSystem eigendecompose(const HamiltonianMatrix& h, double degeneracy_tol_ghz) {
  const Eigen::Matrix3cd& m = h.matrix;
  const double scale = std::max(m.norm(), 1.0);
  if ((m - m.adjoint()).norm() > 1e-12 * scale) {
    throw std::invalid_argument("Hamiltonian must be Hermitian");
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> solver(m);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigendecomposition failed");
  }

  EigenSystem es;
  for (int k = 0; k < 3; ++k) es.values[k] = solver.eigenvalues()(k);
  es.vectors = solver.eigenvectors();

  // Adiabatic labels: the permutation of {+1, 0, -1} maximizing the summed
  // overlap with the corresponding basis states. A greedy per-column argmax
  // can double-assign a label when states mix strongly; the full search over
  // the six permutations cannot.
  double overlap[3][3];  // [basis row][eigenvector column]
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 3; ++k) overlap[r][k] = std::norm(es.vectors(r, k));
  }
  static constexpr int kPerms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                       {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  static constexpr int kRowLabel[3] = {+1, 0, -1};
  double best = -1.0;
  for (const auto& perm : kPerms) {
    const double total = overlap[perm[0]][0] + overlap[perm[1]][1] + overlap[perm[2]][2];
    if (total > best) {
      best = total;
      for (int k = 0; k < 3; ++k) es.labels[k] = kRowLabel[perm[k]];
    }
  }

  es.degenerate = false;
  for (int a = 0; a < 3 && !es.degenerate; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      if (std::abs(es.values[a] - es.values[b]) < degeneracy_tol_ghz) {
        es.degenerate = true;
        break;
      }
    }
  }
  return es;
}

TransitionFrequencies transition_frequencies(const EigenSystem& es) {
  TransitionFrequencies tf;
  tf.f_minus_ghz = es.value(-1) - es.value(0);
  tf.f_plus_ghz = es.value(+1) - es.value(0);
  tf.degenerate = es.degenerate;
  return tf;
}

}  // namespace nvsense
