#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace amort {

using Vec = std::vector<double>;

// Dense row-major matrix. The toolkit works at desk scale (n <= ~64),
// so everything below is a direct O(n^3) method with no blocking.
struct Matrix {
  int rows = 0;
  int cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

  static Matrix identity(int n);
};

// --- vector helpers ---------------------------------------------------------
double dot(const Vec& a, const Vec& b);
double norm2(const Vec& a);
double norm2sq(const Vec& a);
void axpy(double a, const Vec& x, Vec& y);  // y += a*x
Vec add(const Vec& a, const Vec& b);
Vec sub(const Vec& a, const Vec& b);
Vec scaled(const Vec& a, double s);

// --- matrix helpers ---------------------------------------------------------
Vec matvec(const Matrix& a, const Vec& x);
Vec matvec_t(const Matrix& a, const Vec& x);  // a^T x
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
double frobenius_distance(const Matrix& a, const Matrix& b);
double max_abs_diff(const Vec& a, const Vec& b);

// Solve A x = b for symmetric positive definite A. Throws std::runtime_error
// when the factorization breaks down.
Vec cholesky_solve(const Matrix& a, const Vec& b);

// Solve A x = b by partial-pivot LU for general square A. Throws when the
// pivot falls below pivot_tol relative to the largest entry of A.
Vec lu_solve(const Matrix& a, const Vec& b, double pivot_tol = 1e-13);
// Same solve, reporting singularity instead of throwing.
bool lu_solve_maybe(const Matrix& a, const Vec& b, Vec& x, double pivot_tol = 1e-13);

// Symmetric eigendecomposition A = V diag(values) V^T by cyclic Jacobi
// sweeps. Columns of `vectors` are the eigenvectors; values are unsorted.
struct Eigh {
  Vec values;
  Matrix vectors;
};
Eigh jacobi_eigh(const Matrix& a, double tol = 1e-12, int max_sweeps = 100);

// Largest-magnitude eigenvalue estimate of a symmetric operator given only
// matrix-vector products. Deterministic start vector.
double power_iteration_lmax(const std::function<Vec(const Vec&)>& op, int n, int iters);

// Largest singular value of a general matrix (power iteration on A^T A).
double operator_norm(const Matrix& a, int iters = 200);

// Conjugate gradient for SPD operators.
struct CgResult {
  Vec x;
  bool converged = false;
  int iters = 0;
  double residual = 0.0;
};
CgResult cg_solve(const std::function<Vec(const Vec&)>& op, const Vec& b, double tol,
                  int max_iters);

}  // namespace amort
