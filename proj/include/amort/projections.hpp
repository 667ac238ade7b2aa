#pragma once

#include "amort/core.hpp"

namespace amort {

// Closed-form (sub)differentiable projections. The regularized ones
// (sigmoid, softargmax) are intentionally not idempotent.
enum class ProjectionKind {
  relu_orthant,
  sigmoid_cube,
  softargmax_simplex,
  soc,
  psd,
  sphere,
};

const char* projection_name(ProjectionKind kind);
ProjectionKind projection_from_name(const std::string& name);

Vec proj_relu(const Vec& x);
Vec proj_sigmoid(const Vec& x);
Vec proj_softargmax(const Vec& x);

// Second-order cone {(x, y) : |x| <= y}; input split as (x, y).
std::pair<Vec, double> proj_soc(const Vec& x, double y);

// Nearest PSD matrix by clamping eigenvalues (cyclic Jacobi, k <= 16).
Matrix proj_psd(const Matrix& x);

// x / |x|; throws for |x| <= 1e-12 where the projection is undefined.
Vec proj_sphere(const Vec& x);

// Unified flat encodings: soc packs (x, y) with y last, psd packs the k x k
// matrix row-major.
Vec project(ProjectionKind kind, const Vec& input);

struct JvpResult {
  Vec tangent;
  // set when the input sits within 1e-8 of a non-differentiable boundary
  // (relu zeros, soc case edges, psd zero eigenvalues)
  bool near_boundary = false;
};
JvpResult proj_jvp(ProjectionKind kind, const Vec& input, const Vec& dir);

// Solves the variational definition directly; supported for the kinds with
// one (relu, sigmoid, softargmax). Test oracle for the closed forms.
struct NumericProjResult {
  Vec y;
  bool converged = false;
};
NumericProjResult proj_numeric_oracle(ProjectionKind kind, const Vec& input, double tol);

}  // namespace amort
