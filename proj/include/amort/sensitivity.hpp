#pragma once

#include "amort/core.hpp"

namespace amort {

// A context paired with a solution whose stationarity has been measured.
struct SolvedInstance {
  ContextVector x;
  DomainPoint ystar;
  double stationarity_norm = 0.0;
};

SolvedInstance solve_instance(const ProblemFamily& family, const ContextVector& x);

// Envelope theorem: gradient of the optimal value w.r.t. the context equals
// the context-gradient of the objective at the solution.
Vec envelope_value_grad(const ProblemFamily& family, const SolvedInstance& inst);

// Implicit (Dini) adjoint derivative of the solution map: solves
// H(ystar) D = -D_x grad_y f columnwise. Requires a nonsingular Hessian
// (smallest singular value >= 1e-8) at the solution.
Matrix dini_adjoint(const ProblemFamily& family, const SolvedInstance& inst);
// Adjoint product (D_x ystar)^T cotangent without materializing the full
// matrix solve result against every context column.
Vec dini_adjoint_vjp(const ProblemFamily& family, const SolvedInstance& inst,
                     const Vec& cotangent);

// Dense Hessian at a point via n HVPs; shared by the checks above.
Matrix dense_hessian(const ProblemFamily& family, const DomainPoint& y, const ContextVector& x);

}  // namespace amort
