#include "amort/sensitivity.hpp"

#include <cmath>
#include <stdexcept>

namespace amort {

namespace {
constexpr double kStationarityTol = 1e-7;
constexpr double kSingularTol = 1e-8;

void require_solved(const SolvedInstance& inst, const char* op) {
  if (inst.stationarity_norm > kStationarityTol)
    throw std::invalid_argument(std::string(op) + ": instance not solved to stationarity (" +
                                std::to_string(inst.stationarity_norm) + " > 1e-7)");
}
}  // namespace

SolvedInstance solve_instance(const ProblemFamily& family, const ContextVector& x) {
  if (!family.has_oracle())
    throw std::runtime_error("solve_instance: family '" + family.name + "' has no oracle");
  SolvedInstance inst;
  inst.x = x;
  inst.ystar = family.oracle(x);
  inst.stationarity_norm = stationarity_residual(family, inst.ystar, inst.x);
  return inst;
}

Matrix dense_hessian(const ProblemFamily& family, const DomainPoint& y, const ContextVector& x) {
  const int n = family.n;
  Matrix h(n, n);
  Vec e(n, 0.0);
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    const Vec col = family.hvp_y(y, x, e);
    for (int i = 0; i < n; ++i) h(i, j) = col[i];
    e[j] = 0.0;
  }
  return h;
}

Vec envelope_value_grad(const ProblemFamily& family, const SolvedInstance& inst) {
  require_solved(inst, "envelope_value_grad");
  if (!family.grad_x)
    throw std::runtime_error("envelope_value_grad: family '" + family.name +
                             "' exposes no context gradient");
  return family.grad_x(inst.ystar, inst.x);
}

namespace {
Matrix checked_hessian(const ProblemFamily& family, const SolvedInstance& inst) {
  const Matrix h = dense_hessian(family, inst.ystar, inst.x);
  const Eigh eig = jacobi_eigh(h);
  double smin = std::abs(eig.values[0]);
  for (double v : eig.values) smin = std::min(smin, std::abs(v));
  if (smin < kSingularTol)
    throw std::runtime_error(
        "dini_adjoint: Hessian at the solution is singular (smallest singular value " +
        std::to_string(smin) + "), violating the implicit-function nonsingularity hypothesis");
  return h;
}
}  // namespace

Matrix dini_adjoint(const ProblemFamily& family, const SolvedInstance& inst) {
  require_solved(inst, "dini_adjoint");
  if (!family.cross_jacobian)
    throw std::runtime_error("dini_adjoint: family '" + family.name +
                             "' exposes no mixed derivative D_x grad_y f");
  const Matrix h = checked_hessian(family, inst);
  const Matrix cross = family.cross_jacobian(inst.ystar, inst.x);

  const int n = family.n, m = cross.cols;
  Matrix d(n, m);
  Vec rhs(n);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) rhs[i] = -cross(i, j);
    const Vec col = lu_solve(h, rhs);
    for (int i = 0; i < n; ++i) d(i, j) = col[i];
  }
  return d;
}

Vec dini_adjoint_vjp(const ProblemFamily& family, const SolvedInstance& inst,
                     const Vec& cotangent) {
  require_solved(inst, "dini_adjoint");
  if (!family.cross_jacobian)
    throw std::runtime_error("dini_adjoint: family '" + family.name +
                             "' exposes no mixed derivative D_x grad_y f");
  const Matrix h = checked_hessian(family, inst);
  const Matrix cross = family.cross_jacobian(inst.ystar, inst.x);
  // (D_x y*)^T c = -cross^T H^{-1} c, one solve regardless of ctx_dim
  const Vec hc = lu_solve(h, cotangent);
  return scaled(matvec_t(cross, hc), -1.0);
}

}  // namespace amort
