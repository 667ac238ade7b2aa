#pragma once

#include "amort/models.hpp"

namespace amort {

// A fixed-point map g bound to one context; jac_g is needed by Newton and by
// the learned-acceleration VJP.
struct FixedPointMap {
  int n = 0;
  ContextVector x;
  std::function<Vec(const Vec&)> g;
  std::function<Matrix(const Vec&)> jac_g;  // optional
};

Vec fp_residual(const FixedPointMap& map, const Vec& y);
// N(y) = |g(y) - y|^2
double fp_residual_norm2(const FixedPointMap& map, const Vec& y);

struct FpResult {
  Vec y;
  bool converged = false;
  int iters = 0;
  IterateTrace trace;  // iterates plus |R| per iterate
};

FpResult plain_iterate(const FixedPointMap& map, const Vec& y0, int max_iters, double tol);
// Newton on the residual R(y) = g(y) - y: y+ = y - (Dg - I)^{-1} R(y).
FpResult newton_root(const FixedPointMap& map, const Vec& y0, int max_iters, double tol);

// Sliding window of the last M+1 iterates with their g values and residuals.
struct AaHistory {
  int capacity = 1;  // M+1
  std::vector<Vec> iterates;
  std::vector<Vec> g_values;
  std::vector<Vec> residuals;
  void push(Vec y, Vec gy);
  int size() const { return static_cast<int>(iterates.size()); }
};

struct AaAlphaResult {
  Vec alpha;
  bool fallback = false;  // KKT system singular, uniform weights used
};
// argmin_alpha |R alpha|^2 s.t. 1'alpha = 1, solved through the KKT system.
AaAlphaResult aa_alpha(const AaHistory& history);

// beta sum_i alpha_i g(y_i) + (1-beta) sum_i alpha_i y_i
Vec aa_update(const AaHistory& history, const Vec& alpha, double beta);

FpResult aa_solve(const FixedPointMap& map, const Vec& y0, int M, int max_iters, double tol);

// --- learned acceleration ----------------------------------------------------
// Initialization model: affine map ctx -> y^0. Acceleration model: MLP from
// the flattened residual window (vectors + norms) to (alpha pre-weights,
// beta logit).
struct LearnedAccelSpec {
  int n = 0;
  int ctx_dim = 0;
  int M = 1;           // window M+1
  int hidden = 32;     // coeff net width
  MlpSpec coeff_net() const;
  std::vector<std::pair<std::string, std::vector<int>>> param_layout() const;
  int param_count() const;
};

ModelParams learned_accel_init_params(const LearnedAccelSpec& spec, Rng& rng);

struct LearnedAccelResult {
  Vec y;
  IterateTrace trace;  // iterates, |R| values, alphas per step
  bool converged = false;
  int iters = 0;
};
// Runs K coefficient-predicted AA steps; stops early at tol when stop_at_tol
// is set (training uses the fixed-length graph).
LearnedAccelResult learned_accel_solve(const FixedPointMap& map, const LearnedAccelSpec& spec,
                                       const ModelParams& params, int K, double tol = 0.0,
                                       bool stop_at_tol = false);

// Reverse-mode product through the unrolled solve. iterate_cotangents has
// K+1 entries (empty = zero); alpha_cotangents (optional, K entries) feeds
// regularizers on the mixing weights. Requires map.jac_g.
Vec learned_accel_vjp(const FixedPointMap& map, const LearnedAccelSpec& spec,
                      const ModelParams& params, int K,
                      const std::vector<Vec>& iterate_cotangents,
                      const std::vector<Vec>* alpha_cotangents = nullptr);

// sum_t N(y^t) / normalization  (default normalization: N(y^0) + 1e-12,
// treated as a constant scale in gradients)
double neuralfp_loss(const IterateTrace& trace, double normalization);
double neuralfp_default_normalization(const IterateTrace& trace);
// Gradient of neuralfp_loss w.r.t. the learned-acceleration parameters.
Vec neuralfp_grad(const FixedPointMap& map, const LearnedAccelSpec& spec,
                  const ModelParams& params, int K, double normalization);

// sum_t w_t |y* - y^t|^2 + reg_weight sum_t |alpha^t - uniform|^2 with
// non-decreasing weights; reg_weight is annealed to zero by the caller.
double hyperaa_loss(const IterateTrace& trace, const Vec& ystar, const Vec& weights,
                    const std::vector<Vec>& alpha_seq, double reg_weight);
// Linear annealing schedule: reaches exactly zero at the final epoch.
double hyperaa_reg_weight(double initial, long epoch, long total_epochs);

// --- benchmark fixed-point families ------------------------------------------
// Affine g(y; x) = A y + b with spectral radius drawn from
// [rho_lo, rho_hi]; context packs [A, b]. Analytic fixed point available.
struct FpFamily {
  std::string name;
  int n = 0;
  int ctx_dim = 0;
  std::function<ContextVector(Rng&)> sample;
  std::function<FixedPointMap(const ContextVector&)> make_map;
  std::function<Vec(const ContextVector&)> fixed_point;  // optional
};

FpFamily make_affine_fp_family(int n, double rho_lo, double rho_hi);
// Nonlinear variant g(y; x) = 0.9 tanh(W y) + b.
FpFamily make_tanh_fp_family(int n, std::uint64_t seed);

}  // namespace amort
