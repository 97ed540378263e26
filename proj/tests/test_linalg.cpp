#include <catch2/catch_amalgamated.hpp>

#include "bilevel/linalg.hpp"
#include "helpers.hpp"

using namespace bilevel;
using testutil::Rng;

TEST_CASE("block_inverse identity case") {
  const Matrix i2 = Matrix::Identity(2, 2);
  const Matrix z = Matrix::Zero(2, 2);
  const auto inv = block_inverse(i2, z, z, i2);
  CHECK((inv.B1 - i2).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(inv.B2.cwiseAbs().maxCoeff() < 1e-14);
  CHECK(inv.B3.cwiseAbs().maxCoeff() < 1e-14);
  CHECK((inv.B4 - i2).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("block_inverse diagonal case") {
  Matrix m1(1, 1), m2(1, 1), m3(1, 1), m4(1, 1);
  m1 << 2.0;
  m2 << 0.0;
  m3 << 0.0;
  m4 << 4.0;
  const auto inv = block_inverse(m1, m2, m3, m4);
  CHECK(inv.B1(0, 0) == Catch::Approx(0.5).margin(1e-15));
  CHECK(inv.B4(0, 0) == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("block_inverse matches dense inversion on a random 6x6 split 4+2") {
  Rng rng(42);
  const Matrix m = testutil::random_spd(rng, 6, 0.5, 3.0) + 0.1 * rng.matrix(6, 6);
  const Matrix m1 = m.topLeftCorner(4, 4), m2 = m.topRightCorner(4, 2);
  const Matrix m3 = m.bottomLeftCorner(2, 4), m4 = m.bottomRightCorner(2, 2);
  const auto inv = block_inverse(m1, m2, m3, m4);
  const Matrix dense = m.inverse();  // oracle: full dense LU inverse
  CHECK((inv.B1 - dense.topLeftCorner(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((inv.B2 - dense.topRightCorner(4, 2)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((inv.B3 - dense.bottomLeftCorner(2, 4)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((inv.B4 - dense.bottomRightCorner(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("block_inverse reconstructs the identity on random well-conditioned matrices") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Index p = rng.integer(1, 5);
    const Index q = rng.integer(1, 5);
    const Index n = p + q;
    // Condition number <= 1e6 by construction of the spectrum.
    const Matrix q1 = testutil::random_orthogonal(rng, n);
    Vector eigs(n);
    for (Index i = 0; i < n; ++i) eigs(i) = std::pow(10.0, rng.uniform(-3.0, 3.0));
    const Matrix m = q1 * eigs.asDiagonal() * testutil::random_orthogonal(rng, n);
    const auto inv = block_inverse(m.topLeftCorner(p, p), m.topRightCorner(p, q),
                                   m.bottomLeftCorner(q, p), m.bottomRightCorner(q, q));
    const Matrix recon = m * assemble_blocks(inv.B1, inv.B2, inv.B3, inv.B4);
    CHECK((recon - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-9 * eigs.maxCoeff());
  }
}

TEST_CASE("block_inverse rejects singular blocks") {
  const Matrix z1 = Matrix::Zero(1, 1);
  const Matrix i1 = Matrix::Identity(1, 1);
  CHECK_THROWS_AS(block_inverse(z1, z1, z1, i1), SingularMatrixError);
  // M4 - M3 M1^-1 M2 = 1 - 1 = 0: singular Schur complement.
  CHECK_THROWS_AS(block_inverse(i1, i1, i1, i1), SingularMatrixError);
}

TEST_CASE("finite differences recover linear maps exactly") {
  Rng rng(3);
  const Matrix a = rng.matrix(3, 4);
  const auto f = [&](const Vector& x) -> Vector { return a * x; };
  const Matrix jac = finite_difference_jacobian(f, rng.vector(4), 1e-5);
  CHECK((jac - a).cwiseAbs().maxCoeff() < 1e-9);

  const auto ident = [](const Vector& x) -> Vector { return x; };
  const Matrix ji = finite_difference_jacobian(ident, rng.vector(5));
  CHECK((ji - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("finite differences match analytic derivatives of (x1^2, x1 x2)") {
  const auto f = [](const Vector& x) -> Vector {
    Vector y(2);
    y << x(0) * x(0), x(0) * x(1);
    return y;
  };
  Vector x0(2);
  x0 << 1.0, 1.0;
  const Matrix jac = finite_difference_jacobian(f, x0, 1e-5);
  Matrix expect(2, 2);
  expect << 2.0, 0.0, 1.0, 1.0;
  CHECK((jac - expect).cwiseAbs().maxCoeff() < 1e-8);
}
