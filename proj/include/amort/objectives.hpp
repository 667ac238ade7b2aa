#pragma once

#include "amort/core.hpp"

namespace amort {

// ---------------------------------------------------------------------------
// Quadratic family: f(y; x) = 1/2 y'Ay - b'y with A sampled SPD per context.
// Context layout: [A row-major (n*n), b (n)].
// ---------------------------------------------------------------------------
ProblemFamily make_quadratic_family(int n, double eig_lo, double eig_hi);

Matrix quadratic_ctx_matrix(const ContextVector& x, int n);
Vec quadratic_ctx_rhs(const ContextVector& x, int n);
ContextVector pack_quadratic_ctx(const Matrix& a, const Vec& b);

// Random orthogonal matrix via Gram-Schmidt on Gaussian columns.
Matrix random_orthogonal(int n, Rng& rng);

// ---------------------------------------------------------------------------
// Sparse coding: E(y; x) = 1/2 ||x - W_d y||^2 + alpha ||y||_1.
// Context layout: [x_signal (m)].
// ---------------------------------------------------------------------------
struct SparseCodingFamilyConfig {
  Matrix W_d;   // m x n dictionary
  double alpha = 0.0;
  double L = 0.0;   // >= lambda_max(W_d' W_d), from power iteration with margin
  Matrix W_e;   // n x m filter, W_d' / L exactly
  Matrix S;     // n x n mutual inhibition, I - W_e W_d
  double beta = 0.0;  // alpha / L
};

SparseCodingFamilyConfig make_sparse_coding_config(Matrix W_d, double alpha);
Matrix sample_dictionary(int m, int n, Rng& rng);  // unit-norm columns

// h_beta(v) = sign(v) max(0, |v| - beta), elementwise.
Vec soft_threshold(const Vec& v, double beta);

// One h_beta(F x + G y) iteration; shared by ista_step and the LISTA model so
// both produce bitwise-identical trajectories at matched weights.
Vec ista_like_step(const Matrix& f, const Matrix& g, double beta, const Vec& x_signal,
                   const Vec& y);

double sparse_energy(const Vec& y, const Vec& x_signal, const Matrix& w_d, double alpha);

Vec ista_step(const DomainPoint& y, const ContextVector& x, const SparseCodingFamilyConfig& cfg);

struct FistaResult {
  DomainPoint y;
  bool converged = false;
  int iters = 0;
};
// Momentum-accelerated ISTA; returns the best-energy iterate seen, so a
// larger budget never yields a worse energy.
FistaResult fista_solve(const ContextVector& x, const SparseCodingFamilyConfig& cfg, double tol,
                        int max_iters);

ProblemFamily make_sparse_coding_family(int m, int n, double alpha, std::uint64_t dict_seed);
const SparseCodingFamilyConfig& sparse_coding_config(const ProblemFamily& family);

// ---------------------------------------------------------------------------
// Sphere family: soft-min of geodesic components on S^2, evaluated through
// the sphere projection so the ambient problem is unconstrained.
// Context layout: [z_1 (3), ..., z_m (3), alpha_1..alpha_m].
// ---------------------------------------------------------------------------
struct SphereFamilyConfig {
  int m = 4;
  double gamma = 0.1;
  double var_beta = 1.0;
  int oracle_grid = 4096;     // Fibonacci lattice size
  int oracle_refine = 200;    // projected-gradient polish steps
};

double geodesic_distance(const Vec& a, const Vec& b);
double softmin(const Vec& values, double gamma);

ProblemFamily make_sphere_family(const SphereFamilyConfig& cfg);
std::vector<Vec> fibonacci_sphere(int count);

// ---------------------------------------------------------------------------
// Deterministic max-Q surrogate: f(y; x) = -Q(x, y) with
// Q(x, u) = -1/2 u'Pu + u'Rx. Context layout: [state (s)].
// ---------------------------------------------------------------------------
ProblemFamily make_maxq_family(int state_dim, int control_dim, std::uint64_t seed);
const Matrix& maxq_p_matrix(const ProblemFamily& family);
const Matrix& maxq_r_matrix(const ProblemFamily& family);

}  // namespace amort
