#include <doctest.h>

#include <cmath>
#include <random>

#include "nvsense/spin_model.hpp"
#include "oracles.hpp"

using namespace nvsense;

namespace {

Eigen::Matrix3cd commutator(const Eigen::Matrix3cd& a, const Eigen::Matrix3cd& b) {
  return a * b - b * a;
}

// Random Hermitian matrix with entries of order "scale".
Eigen::Matrix3cd random_hermitian(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::Matrix3cd m;
  for (int r = 0; r < 3; ++r) {
    m(r, r) = u(rng);
    for (int c = r + 1; c < 3; ++c) {
      m(r, c) = std::complex<double>(u(rng), u(rng));
      m(c, r) = std::conj(m(r, c));
    }
  }
  return m;
}

}  // namespace

TEST_CASE("spin-1 operators satisfy the angular momentum algebra") {
  const Spin1Operators& s = spin_operators();
  const std::complex<double> i(0.0, 1.0);

  CHECK((commutator(s.sx, s.sy) - i * s.sz).norm() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK((commutator(s.sy, s.sz) - i * s.sx).norm() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK((commutator(s.sz, s.sx) - i * s.sy).norm() == doctest::Approx(0.0).epsilon(1e-14));

  // Casimir S^2 = s(s+1) = 2 for spin 1.
  const Eigen::Matrix3cd s2 = s.sx * s.sx + s.sy * s.sy + s.sz * s.sz;
  CHECK((s2 - 2.0 * Eigen::Matrix3cd::Identity()).norm() < 1e-14);

  CHECK(s.sz(0, 0) == std::complex<double>(1.0, 0.0));
  CHECK(s.sz(1, 1) == std::complex<double>(0.0, 0.0));
  CHECK(s.sz(2, 2) == std::complex<double>(-1.0, 0.0));
}

TEST_CASE("default constants put the crossing field at 102.5 mT") {
  const Constants c;
  CHECK(c.delta_ghz == doctest::Approx(2.87).epsilon(1e-15));
  CHECK(c.b_zfs_mt() == doctest::Approx(102.5).epsilon(1e-12));
  CHECK(c.gyromagnetic_ghz_per_mt == doctest::Approx(0.028).epsilon(1e-12));
  // The implied g-factor is the free-electron-like value near 2.
  CHECK(c.g_factor() == doctest::Approx(2.0).epsilon(1e-3));

  CHECK(Constants::from_b_zfs(2.87, 102.5).gyromagnetic_ghz_per_mt ==
        doctest::Approx(c.gyromagnetic_ghz_per_mt).epsilon(1e-15));
  const Constants g2 = Constants::from_g_factor(2.87, 2.0028);
  CHECK(g2.gyromagnetic_ghz_per_mt == doctest::Approx(2.0028 * kBohrMagnetonGhzPerMt).epsilon(1e-15));

  CHECK_THROWS_AS(Constants::from_b_zfs(2.87, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(Constants::from_g_factor(-2.87, 2.0), std::invalid_argument);
}

TEST_CASE("aligned field gives the linear Zeeman ladder") {
  const Constants c;
  for (double b : {0.0, 10.0, 55.0, 80.0, 102.5, 150.0}) {
    const HamiltonianMatrix h = build_hamiltonian_planar(c, 0.0, b, 0.0);
    // Diagonal in the Sz basis when aligned.
    CHECK(std::abs(h.matrix(0, 1)) + std::abs(h.matrix(0, 2)) + std::abs(h.matrix(1, 2)) < 1e-15);
    const EigenSystem es = eigendecompose(h);
    const double zeeman = c.gyromagnetic_ghz_per_mt * b;
    CHECK(es.value(+1) == doctest::Approx(c.delta_ghz + zeeman).epsilon(1e-12));
    CHECK(es.value(0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(es.value(-1) == doctest::Approx(c.delta_ghz - zeeman).epsilon(1e-12));
  }
}

TEST_CASE("transition frequencies at the reference fields") {
  const Constants c;
  const auto f_minus = [&](double b) {
    return transition_frequencies(eigendecompose(build_hamiltonian_planar(c, 0.0, b, 0.0)))
        .f_minus_ghz;
  };
  // The lower transition runs 2.87 -> 0 linearly between 0 and 102.5 mT.
  CHECK(f_minus(20.0) == doctest::Approx(2.310).epsilon(1e-10));
  CHECK(f_minus(80.0) == doctest::Approx(0.630).epsilon(1e-10));
}

TEST_CASE("transverse coupling magnitude at 90 degrees") {
  const Constants c;
  const HamiltonianMatrix h = build_hamiltonian_planar(c, 0.0, 20.0, 1.5707963267948966);
  // gyro*b/sqrt(2) in the off-diagonal Sy entries.
  CHECK(std::abs(h.matrix(0, 1)) == doctest::Approx(0.56 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(std::abs(h.matrix(1, 2)) == doctest::Approx(0.56 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(std::abs(h.matrix(0, 2)) < 1e-15);
  // The diagonal Zeeman part vanishes at 90 degrees.
  CHECK(h.matrix(0, 0).real() == doctest::Approx(c.delta_ghz).epsilon(1e-12));
  CHECK(h.matrix(2, 2).real() == doctest::Approx(c.delta_ghz).epsilon(1e-12));
}

TEST_CASE("hamiltonian is Hermitian with zero trace offset") {
  const Constants c;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ub(0.0, 150.0);
  std::uniform_real_distribution<double> ut(-3.2, 3.2);
  std::uniform_real_distribution<double> us(0.0, 0.02);
  for (int k = 0; k < 200; ++k) {
    const double b = ub(rng);
    const double theta = ut(rng);
    const double strain = us(rng);
    const HamiltonianMatrix h = build_hamiltonian_planar(c, strain, b, theta);
    CHECK((h.matrix - h.matrix.adjoint()).norm() < 1e-14);
    // Trace = 2*delta independent of field, angle and strain.
    CHECK(h.matrix.trace().real() == doctest::Approx(2.0 * c.delta_ghz).epsilon(1e-12));
    CHECK(h.matrix.trace().imag() == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  }
}

TEST_CASE("vector build reduces to the planar build") {
  const Constants c;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> ub(1.0, 120.0);
  for (int k = 0; k < 100; ++k) {
    Eigen::Vector3d axis(u(rng), u(rng), u(rng));
    if (axis.norm() < 1e-3) continue;
    axis.normalize();
    Eigen::Vector3d bdir(u(rng), u(rng), u(rng));
    if (bdir.norm() < 1e-3) continue;
    bdir.normalize();
    const double b = ub(rng);

    const HamiltonianMatrix hv =
        build_hamiltonian_vector(c, 0.0, FieldVector::from_vec(b * bdir), axis);
    const double theta = std::acos(std::clamp(bdir.dot(axis), -1.0, 1.0));
    const HamiltonianMatrix hp = build_hamiltonian_planar(c, 0.0, b, theta);
    CHECK(hv.params.b_mag_mt == doctest::Approx(b).epsilon(1e-12));
    CHECK(hv.params.theta_rad == doctest::Approx(theta).epsilon(1e-9));
    // Same spectrum either way.
    const auto ev = oracle::hermitian_eigenvalues(hv.matrix);
    const auto ep = oracle::hermitian_eigenvalues(hp.matrix);
    for (int i = 0; i < 3; ++i) CHECK(ev[i] == doctest::Approx(ep[i]).epsilon(1e-10));
  }

  CHECK_THROWS_AS(build_hamiltonian_vector(c, 0.0, {1.0, 0.0, 0.0}, {0.0, 0.0, 0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_hamiltonian_planar(c, 0.0, -1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(build_hamiltonian_planar(c, -0.01, 10.0, 0.0), std::invalid_argument);
}

TEST_CASE("eigendecompose matches the characteristic polynomial") {
  const Constants c;
  std::mt19937_64 rng(23);

  SUBCASE("model Hamiltonians across the field range") {
    std::uniform_real_distribution<double> ub(0.0, 150.0);
    std::uniform_real_distribution<double> ut(0.0, 3.2);
    for (int k = 0; k < 500; ++k) {
      const HamiltonianMatrix h = build_hamiltonian_planar(c, 0.0, ub(rng), ut(rng));
      const EigenSystem es = eigendecompose(h);
      std::array<double, 3> sorted = es.values;
      std::sort(sorted.begin(), sorted.end());
      const auto ref = oracle::hermitian_eigenvalues(h.matrix);
      for (int i = 0; i < 3; ++i) {
        CHECK(sorted[i] == doctest::Approx(ref[i]).epsilon(1e-9).scale(1.0));
      }
    }
  }

  SUBCASE("arbitrary Hermitian matrices") {
    for (int k = 0; k < 500; ++k) {
      HamiltonianMatrix h;
      h.matrix = random_hermitian(rng, 3.0);
      const EigenSystem es = eigendecompose(h);
      std::array<double, 3> sorted = es.values;
      std::sort(sorted.begin(), sorted.end());
      const auto ref = oracle::hermitian_eigenvalues(h.matrix);
      for (int i = 0; i < 3; ++i) {
        CHECK(sorted[i] == doctest::Approx(ref[i]).epsilon(1e-9).scale(1.0));
      }
      // Columns form an orthonormal frame.
      CHECK((es.vectors.adjoint() * es.vectors - Eigen::Matrix3cd::Identity()).norm() < 1e-12);
    }
  }

  SUBCASE("non-Hermitian input is rejected") {
    HamiltonianMatrix h;
    h.matrix = Eigen::Matrix3cd::Zero();
    h.matrix(0, 1) = std::complex<double>(0.3, 0.1);
    CHECK_THROWS_AS(eigendecompose(h), std::invalid_argument);
  }
}

TEST_CASE("frozen eigenvalues at 60 mT and 0.3 rad tilt") {
  const Constants c;
  const HamiltonianMatrix h = build_hamiltonian_planar(c, 0.0, 60.0, 0.3);
  const EigenSystem es = eigendecompose(h);
  // Values pinned against the characteristic-polynomial roots.
  CHECK(es.value(0) == doctest::Approx(-0.116078912).epsilon(2e-9));
  CHECK(es.value(-1) == doctest::Approx(1.353508482).epsilon(2e-9));
  CHECK(es.value(+1) == doctest::Approx(4.502570430).epsilon(2e-9));
  CHECK_FALSE(es.degenerate);
}

TEST_CASE("adiabatic labels are a bijection even under strong mixing") {
  const Constants c;
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> ub(0.0, 150.0);
  std::uniform_real_distribution<double> ut(0.0, 3.2);
  for (int k = 0; k < 300; ++k) {
    const EigenSystem es = eigendecompose(build_hamiltonian_planar(c, 0.0, ub(rng), ut(rng)));
    int sum = 0;
    int prod = 1;
    for (int label : es.labels) {
      sum += label;
      prod *= (label + 2);  // {1, 2, 3} for {-1, 0, +1}
    }
    CHECK(sum == 0);
    CHECK(prod == 6);
  }
}

TEST_CASE("labels follow the adiabatic branch near the crossing") {
  const Constants c;
  // Just below b_zfs and barely tilted: |0> and |-1> are strongly mixed but
  // the labeling still assigns each eigenvector its dominant basis state.
  const EigenSystem es = eigendecompose(build_hamiltonian_planar(c, 0.0, 101.0, 0.02));
  CHECK_FALSE(es.degenerate);
  const auto tf = transition_frequencies(es);
  CHECK(tf.f_minus_ghz < 0.2);
  CHECK(tf.f_plus_ghz > 5.0);
}

TEST_CASE("degeneracy flag trips at zero field and at the crossing") {
  const Constants c;
  CHECK(eigendecompose(build_hamiltonian_planar(c, 0.0, 0.0, 0.0)).degenerate);
  CHECK(eigendecompose(build_hamiltonian_planar(c, 0.0, 102.5, 0.0)).degenerate);
  CHECK_FALSE(eigendecompose(build_hamiltonian_planar(c, 0.0, 50.0, 0.0)).degenerate);
}

TEST_CASE("strain splits the zero-field line symmetrically") {
  const Constants c;
  const double strain = 0.015;
  const EigenSystem es = eigendecompose(build_hamiltonian_planar(c, strain, 0.0, 0.0));
  CHECK_FALSE(es.degenerate);
  // The +-1 pair splits by 2*strain around delta; the label order within the
  // pair is a tie (both mix the basis states equally), so compare magnitudes.
  CHECK(std::abs(es.value(+1) - es.value(-1)) == doctest::Approx(2.0 * strain).epsilon(1e-10));
  CHECK(es.value(+1) + es.value(-1) == doctest::Approx(2.0 * c.delta_ghz).epsilon(1e-10));
  CHECK(es.value(0) == doctest::Approx(0.0).epsilon(1e-12));
}
