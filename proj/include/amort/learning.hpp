#pragma once

#include "amort/models.hpp"

namespace amort {

enum class LossKind { reg, obj, sum };

struct LossSpec {
  LossKind kind = LossKind::obj;
  LossKind inner_kind = LossKind::obj;  // per-iterate loss under `sum`
  Vec weights;                          // iterate weights under `sum`, length K+1
};

enum class GradMode { full_unroll, first_order, tbptt, imaml, es };

struct GradModeSpec {
  GradMode mode = GradMode::full_unroll;
  int H = 0;                  // tbptt truncation length
  double lambda = 0.0;        // imaml proximal weight
  double imaml_tol = 1e-9;
  int imaml_max_iters = 100000;
  double sigma = 0.1;         // es smoothing
  int pop_size = 32;          // es population (even)
};

struct OptimizerSpec {
  enum class Kind { sgd, adam };
  Kind kind = Kind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptState {
  Vec m, v;
  long t = 0;
};

double loss_reg(const DomainPoint& predict_out, const DomainPoint& ystar);
double loss_obj(const ProblemFamily& family, const DomainPoint& out, const ContextVector& x);

// Scalar value of a LossSpec on a model trace. `ystar` is required for
// regression losses.
double loss_value(const LossSpec& loss, const ProblemFamily& family, const ContextVector& x,
                  const IterateTrace& trace, const DomainPoint* ystar);

// Gradient of the per-context loss w.r.t. theta under the selected mode.
// `es_rng` is consumed only in es mode.
Vec outer_gradient(const AmortModel& model, const ModelParams& params,
                   const ProblemFamily& family, const ContextVector& x, const LossSpec& loss,
                   const GradModeSpec& mode, Rng* es_rng = nullptr);

// Full unroll with the oldest K-H Jacobian factors replaced by identity; a
// biased estimator, kept deliberately so the bias is measurable.
Vec tbptt_gradient(const AmortModel& model, const ModelParams& params,
                   const ProblemFamily& family, const ContextVector& x, const LossSpec& loss,
                   int H);

struct InnerSolveResult {
  DomainPoint y;
  bool converged = false;
  int iters = 0;
  double stationarity = 0.0;
};
// argmin_y f(y; x) + lambda/2 |y - theta0|^2 by gradient descent with step
// 1/(lambda + L_est).
InnerSolveResult imaml_inner_solve(const ProblemFamily& family, const ContextVector& x,
                                   const Vec& theta0, double lambda, double tol, int max_iters);

// D_theta0[y]^T cot = lambda (H(y) + lambda I)^{-1} cot, by conjugate
// gradient on HVPs. Solves the inner problem internally.
Vec imaml_gradient(const ProblemFamily& family, const ContextVector& x, const Vec& theta0,
                   double lambda, const Vec& outer_cotangent, double inner_tol = 1e-10,
                   int inner_max_iters = 200000);
// Same linear solve at an already-solved inner point.
Vec imaml_gradient_at(const ProblemFamily& family, const ContextVector& x, const DomainPoint& yhat,
                      double lambda, const Vec& outer_cotangent);

// Antithetic evolution-strategies estimate of the Gaussian-smoothed loss
// gradient, mean baseline, population evaluated concurrently.
Vec es_gradient(const AmortModel& model, const ModelParams& params, const ProblemFamily& family,
                const std::vector<ContextVector>& contexts, const LossSpec& loss, double sigma,
                int pop_size, Rng& rng);

void optimizer_step(const OptimizerSpec& opt, OptState& state, Vec& params, const Vec& grad);

struct TrainOptions {
  int n_train = 1024;
  int n_val = 128;
  int batch = 32;
  long steps = 1000;
  std::uint64_t seed = 0;
  double clip_norm = 0.0;  // 0 disables clipping
  int val_every = 50;
};

struct MetricsRow {
  long step = 0;
  double train_loss = 0.0;
  double val_mean_gap = 0.0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<MetricsRow> history;
  GapReport final_gap;
  double initial_val_gap = 0.0;
};

// Prediction function honoring the gradient mode (imaml predicts with the
// proximal inner solve instead of the model's unrolled forward).
std::function<DomainPoint(const ContextVector&)> make_predictor(const AmortModel& model,
                                                                const ModelParams& params,
                                                                const ProblemFamily& family,
                                                                const GradModeSpec& mode);

TrainResult train(const AmortModel& model, const ProblemFamily& family, const LossSpec& loss,
                  const GradModeSpec& mode, const OptimizerSpec& opt, const TrainOptions& options,
                  const ModelParams* init = nullptr);

}  // namespace amort
