#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "operon/linalg.hpp"
#include "operon/pca.hpp"
#include "test_helpers.hpp"

using namespace operon;
using namespace operon::testing;

TEST_CASE("cholesky of identity needs no jitter") {
  const CholeskyFactor f = cholesky_with_jitter(Matrix::Identity(3, 3));
  CHECK(f.jitter_used == 0.0);
  CHECK((f.lower - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("cholesky matches the hand factorization of [[2,1],[1,2]]") {
  Matrix a(2, 2);
  a << 2, 1, 1, 2;
  const CholeskyFactor f = cholesky_with_jitter(a);
  CHECK(f.lower(0, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(f.lower(1, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(f.lower(1, 1) == doctest::Approx(std::sqrt(1.5)).epsilon(1e-14));
  CHECK(f.lower(0, 1) == 0.0);
}

TEST_CASE("singular matrix escalates jitter and stays close to the input") {
  Matrix a(2, 2);
  a << 1, 1, 1, 1;
  const CholeskyFactor f = cholesky_with_jitter(a);
  CHECK(f.jitter_used > 0.0);
  const Matrix reconstructed = f.lower * f.lower.transpose();
  CHECK((reconstructed - a).norm() <= 2.0 * f.jitter_used);
}

TEST_CASE("cholesky rejects bad inputs") {
  CHECK_THROWS_AS(cholesky_with_jitter(Matrix::Zero(2, 3)), DimensionMismatch);
  Matrix asym(2, 2);
  asym << 1, 0.5, 0.2, 1;
  CHECK_THROWS_AS(cholesky_with_jitter(asym), std::invalid_argument);
  Matrix negative = -Matrix::Identity(3, 3);
  CHECK_THROWS_AS(cholesky_with_jitter(negative), NotPositiveDefinite);
}

TEST_CASE("chol_solve on identity and diagonal systems") {
  Matrix b(2, 1);
  b << 3, 4;
  const Matrix x = chol_solve(cholesky_with_jitter(Matrix::Identity(2, 2)), b);
  CHECK(x(0, 0) == doctest::Approx(3.0));
  CHECK(x(1, 0) == doctest::Approx(4.0));

  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2;
  d(1, 1) = 4;
  Matrix rhs(2, 1);
  rhs << 2, 8;
  const Matrix y = chol_solve(cholesky_with_jitter(d), rhs);
  CHECK(y(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(y(1, 0) == doctest::Approx(2.0).epsilon(1e-14));

  CHECK_THROWS_AS(chol_solve(cholesky_with_jitter(d), Matrix::Zero(3, 1)), DimensionMismatch);
}

TEST_CASE("chol_solve residual on random SPD systems") {
  Rng rng(7);
  const Matrix a = random_spd(rng, 5);
  const Matrix b = random_matrix(rng, 5, 3);
  const Matrix x = chol_solve(cholesky_with_jitter(a), b);
  CHECK((a * x - b).norm() / b.norm() < 1e-9);
}

TEST_CASE("solve against the factored matrix returns identity") {
  Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix a = random_spd(rng, 6);
    const Matrix inv_a = chol_solve(cholesky_with_jitter(a), a);
    CHECK((inv_a - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("log_det on identity, 2x2, and diagonal matrices") {
  CHECK(log_det(cholesky_with_jitter(Matrix::Identity(4, 4))) == doctest::Approx(0.0));

  Matrix a(2, 2);
  a << 2, 1, 1, 2;
  CHECK(log_det(cholesky_with_jitter(a)) == doctest::Approx(std::log(3.0)).epsilon(1e-12));

  Matrix d = Matrix::Zero(3, 3);
  d.diagonal() << 0.5, 2.0, 7.0;
  CHECK(log_det(cholesky_with_jitter(d)) ==
        doctest::Approx(std::log(0.5) + std::log(2.0) + std::log(7.0)).epsilon(1e-12));
}

TEST_CASE("kron_dense identities and block layout") {
  CHECK((kron_dense(Matrix::Identity(2, 2), Matrix::Identity(3, 3)) - Matrix::Identity(6, 6))
            .norm() == 0.0);

  Matrix a(2, 2), b(2, 2), expected(4, 4);
  a << 1, 2, 3, 4;
  b << 0, 1, 1, 0;
  expected << 0, 1, 0, 2, 1, 0, 2, 0, 0, 3, 0, 4, 3, 0, 4, 0;
  CHECK((kron_dense(a, b) - expected).norm() == 0.0);

  CHECK_THROWS_AS(kron_dense(Matrix::Ones(2000, 2000), Matrix::Ones(2000, 2000)),
                  AllocationLimit);
}

TEST_CASE("kronecker determinant property |A (x) B| = |A|^rb |B|^ra") {
  Rng rng(3);
  const Matrix a = random_spd(rng, 3);
  const Matrix b = random_spd(rng, 2);
  const double dense = kron_dense(a, b).determinant();
  const double split = std::pow(a.determinant(), 2) * std::pow(b.determinant(), 3);
  CHECK(rel_diff(dense, split) < 1e-10);
}

TEST_CASE("log-det kronecker identity on random SPD pairs") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.next_u64() % 5);
    const Index q = 2 + static_cast<Index>(rng.next_u64() % 5);
    const Matrix a = random_spd(rng, n);
    const Matrix b = random_spd(rng, q);
    const double fast = static_cast<double>(q) * log_det(cholesky_with_jitter(a)) +
                        static_cast<double>(n) * log_det(cholesky_with_jitter(b));
    const double dense = log_det(cholesky_with_jitter(kron_dense(a, b)));
    CHECK(std::abs(fast - dense) < 1e-9);
  }
}

TEST_CASE("vec-reshape identity ties the kronecker product to matrix products") {
  Rng rng(13);
  const Index q = 4, n = 3;
  const Matrix c_phi = random_spd(rng, n);
  const Matrix c_y = random_spd(rng, q);
  const Matrix x = random_matrix(rng, q, n);
  const Vector lhs = kron_dense(c_phi, c_y) * vec(x);
  const Vector rhs = vec(c_y * x * c_phi.transpose());
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("unvec round trips vec") {
  Rng rng(5);
  const Matrix x = random_matrix(rng, 4, 6);
  CHECK((unvec(vec(x), 4, 6) - x).norm() == 0.0);
  CHECK_THROWS_AS(unvec(Vector::Zero(5), 2, 3), DimensionMismatch);
}

TEST_CASE("pca on identical rows gives zero projections") {
  Matrix x(6, 4);
  for (Index i = 0; i < 6; ++i) x.row(i) << 1.0, -2.0, 0.5, 3.0;
  const PcaBasis basis = pca_fit(x, 2);  // rank deficient: shrinks with a warning
  const Matrix z = pca_transform(basis, x);
  CHECK(z.cols() == basis.rank());
  if (z.size() > 0) CHECK(z.cwiseAbs().maxCoeff() < 1e-12);
  const Matrix recon = pca_reconstruct(basis, z);
  CHECK((recon - x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pca recovers an exact low-dimensional subspace") {
  Rng rng(17);
  const Matrix coords = random_matrix(rng, 30, 2);
  const Matrix directions = random_matrix(rng, 2, 7);
  Matrix x = coords * directions;
  x.rowwise() += random_vector(rng, 7).transpose();

  const PcaBasis basis = pca_fit(x, 2);
  const Matrix recon = pca_reconstruct(basis, pca_transform(basis, x));
  CHECK((recon - x).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((basis.components * basis.components.transpose() - Matrix::Identity(2, 2))
            .cwiseAbs()
            .maxCoeff() < 1e-8);
}

TEST_CASE("full-rank pca round trip") {
  Rng rng(19);
  const Matrix x = random_matrix(rng, 50, 10);
  const PcaBasis basis = pca_fit(x, 10);
  CHECK(basis.rank() == 10);
  const Matrix recon = pca_reconstruct(basis, pca_transform(basis, x));
  CHECK((recon - x).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("pca residual never grows as r increases") {
  Rng rng(23);
  const Matrix x = random_matrix(rng, 20, 8);
  double last = std::numeric_limits<double>::infinity();
  for (Index r = 1; r <= 8; ++r) {
    const PcaBasis basis = pca_fit(x, r);
    const double residual = (pca_reconstruct(basis, pca_transform(basis, x)) - x).norm();
    CHECK(residual <= last + 1e-12);
    last = residual;
  }
}

TEST_CASE("pca sign convention is deterministic") {
  Rng rng(29);
  const Matrix x = random_matrix(rng, 12, 5);
  const PcaBasis a = pca_fit(x, 3);
  const PcaBasis b = pca_fit(x, 3);
  CHECK((a.components - b.components).norm() == 0.0);
  for (Index i = 0; i < a.rank(); ++i) {
    Index arg_max = 0;
    a.components.row(i).cwiseAbs().maxCoeff(&arg_max);
    CHECK(a.components(i, arg_max) > 0.0);
  }
}
