#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "amort/core.hpp"
#include "amort/linalg.hpp"
#include "amort/objectives.hpp"

using namespace amort;

TEST_CASE("cholesky solves SPD systems") {
  Matrix a(2, 2);
  a(0, 0) = 4.0;
  a(0, 1) = 1.0;
  a(1, 0) = 1.0;
  a(1, 1) = 3.0;
  const Vec x = cholesky_solve(a, {1.0, 2.0});
  const Vec ax = matvec(a, x);
  CHECK(std::abs(ax[0] - 1.0) < 1e-12);
  CHECK(std::abs(ax[1] - 2.0) < 1e-12);
  Matrix bad(2, 2);
  bad(0, 0) = 1.0;
  bad(1, 1) = -1.0;
  CHECK_THROWS(cholesky_solve(bad, {1.0, 1.0}));
}

TEST_CASE("lu solve handles general systems and flags singular ones") {
  Rng rng(3);
  const int n = 6;
  Matrix a(n, n);
  for (double& e : a.data) e = rng.normal();
  const Vec b = rng.normal_vec(n);
  const Vec x = lu_solve(a, b);
  CHECK(max_abs_diff(matvec(a, x), b) < 1e-10);

  Matrix sing(2, 2);
  sing(0, 0) = 1.0;
  sing(0, 1) = 2.0;
  sing(1, 0) = 2.0;
  sing(1, 1) = 4.0;
  Vec out;
  CHECK_FALSE(lu_solve_maybe(sing, {1.0, 1.0}, out));
}

TEST_CASE("jacobi eigendecomposition reconstructs symmetric matrices") {
  Rng rng(7);
  const int n = 8;
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = rng.normal();
      a(i, j) = v;
      a(j, i) = v;
    }
  const Eigh eig = jacobi_eigh(a);
  // A = V diag V^T
  Matrix recon(n, n);
  for (int e = 0; e < n; ++e)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        recon(i, j) += eig.values[e] * eig.vectors(i, e) * eig.vectors(j, e);
  CHECK(frobenius_distance(a, recon) < 1e-9);
  // orthogonality
  const Matrix vtv = matmul(transpose(eig.vectors), eig.vectors);
  CHECK(frobenius_distance(vtv, Matrix::identity(n)) < 1e-10);
}

TEST_CASE("power iteration matches the dense eigensolver") {
  Rng rng(11);
  const int n = 6;
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = rng.normal();
      a(i, j) = v;
      a(j, i) = v;
    }
  const Eigh eig = jacobi_eigh(a);
  double lmax = 0.0;
  for (double v : eig.values) lmax = std::max(lmax, std::abs(v));
  const double est = power_iteration_lmax([&](const Vec& v) { return matvec(a, v); }, n, 500);
  CHECK(std::abs(est - lmax) / lmax < 1e-6);
}

TEST_CASE("conjugate gradient agrees with the direct solve") {
  Rng rng(13);
  const int n = 10;
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = 0.3 * rng.normal();
      a(i, j) = v;
      a(j, i) = v;
    }
  for (int i = 0; i < n; ++i) a(i, i) += 4.0;  // SPD shift
  const Vec b = rng.normal_vec(n);
  const CgResult cg = cg_solve([&](const Vec& v) { return matvec(a, v); }, b, 1e-12, 200);
  CHECK(cg.converged);
  CHECK(max_abs_diff(cg.x, cholesky_solve(a, b)) < 1e-9);
}

TEST_CASE("random orthogonal matrices are orthogonal") {
  Rng rng(17);
  const Matrix q = random_orthogonal(7, rng);
  CHECK(frobenius_distance(matmul(transpose(q), q), Matrix::identity(7)) < 1e-12);
}
