#include "amort/fixedpoint.hpp"

#include <cmath>
#include <stdexcept>

namespace amort {

Vec fp_residual(const FixedPointMap& map, const Vec& y) { return sub(map.g(y), y); }

double fp_residual_norm2(const FixedPointMap& map, const Vec& y) {
  return norm2sq(fp_residual(map, y));
}

namespace {
void check_divergence(const Vec& y) {
  for (double v : y)
    if (!std::isfinite(v) || std::abs(v) > 1e12)
      throw std::runtime_error("fixed-point iteration diverged (|y| > 1e12)");
}
}  // namespace

FpResult plain_iterate(const FixedPointMap& map, const Vec& y0, int max_iters, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("plain_iterate: tol must be > 0");
  FpResult res;
  res.y = y0;
  Vec g = map.g(res.y);
  double rnorm = norm2(sub(g, res.y));
  res.trace.iterates.push_back(res.y);
  res.trace.residual_norms.push_back(rnorm);
  for (int it = 0; it < max_iters; ++it) {
    if (rnorm <= tol) {
      res.converged = true;
      break;
    }
    res.y = g;
    check_divergence(res.y);
    g = map.g(res.y);
    rnorm = norm2(sub(g, res.y));
    res.trace.iterates.push_back(res.y);
    res.trace.residual_norms.push_back(rnorm);
    res.iters = it + 1;
  }
  if (rnorm <= tol) res.converged = true;
  return res;
}

FpResult newton_root(const FixedPointMap& map, const Vec& y0, int max_iters, double tol) {
  if (!map.jac_g) throw std::invalid_argument("newton_root: map has no Jacobian");
  FpResult res;
  res.y = y0;
  res.trace.iterates.push_back(res.y);
  for (int it = 0; it < max_iters; ++it) {
    const Vec r = fp_residual(map, res.y);
    const double rnorm = norm2(r);
    res.trace.residual_norms.push_back(rnorm);
    if (rnorm <= tol) {
      res.converged = true;
      return res;
    }
    Matrix j = map.jac_g(res.y);
    for (int i = 0; i < map.n; ++i) j(i, i) -= 1.0;
    Vec d;
    if (!lu_solve_maybe(j, r, d))
      throw std::runtime_error("newton_root: singular D_y g - I");
    for (int i = 0; i < map.n; ++i) res.y[i] -= d[i];
    check_divergence(res.y);
    res.trace.iterates.push_back(res.y);
    res.iters = it + 1;
  }
  res.converged = norm2(fp_residual(map, res.y)) <= tol;
  return res;
}

void AaHistory::push(Vec y, Vec gy) {
  if (size() == capacity) {
    iterates.erase(iterates.begin());
    g_values.erase(g_values.begin());
    residuals.erase(residuals.begin());
  }
  residuals.push_back(sub(gy, y));
  iterates.push_back(std::move(y));
  g_values.push_back(std::move(gy));
}

AaAlphaResult aa_alpha(const AaHistory& history) {
  const int k = history.size();
  if (k == 0) throw std::invalid_argument("aa_alpha: empty history");
  // KKT system of min |R alpha|^2 s.t. 1'alpha = 1
  Matrix kkt(k + 1, k + 1);
  for (int i = 0; i < k; ++i) {
    for (int j = i; j < k; ++j) {
      const double v = 2.0 * dot(history.residuals[i], history.residuals[j]);
      kkt(i, j) = v;
      kkt(j, i) = v;
    }
    kkt(i, k) = 1.0;
    kkt(k, i) = 1.0;
  }
  Vec rhs(k + 1, 0.0);
  rhs[k] = 1.0;
  Vec sol;
  AaAlphaResult res;
  if (lu_solve_maybe(kkt, rhs, sol, 1e-12)) {
    res.alpha.assign(sol.begin(), sol.begin() + k);
  } else {
    res.alpha.assign(k, 1.0 / static_cast<double>(k));
    res.fallback = true;
  }
  return res;
}

Vec aa_update(const AaHistory& history, const Vec& alpha, double beta) {
  const int k = history.size();
  if (static_cast<int>(alpha.size()) != k)
    throw std::invalid_argument("aa_update: alpha length does not match history");
  double s = 0.0;
  for (double a : alpha) s += a;
  if (std::abs(s - 1.0) > 1e-10)
    throw std::invalid_argument("aa_update: alpha must sum to 1");
  if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("aa_update: beta must be in [0,1]");

  const std::size_t n = history.iterates[0].size();
  auto combine = [&](const std::vector<Vec>& items) {
    Vec out(n, 0.0);
    for (int i = 0; i < k; ++i) axpy(alpha[i], items[i], out);
    return out;
  };
  // exact reductions at the endpoints keep the M=0 trajectory bitwise equal
  // to plain iteration
  if (beta == 1.0) return combine(history.g_values);
  if (beta == 0.0) return combine(history.iterates);
  const Vec cg = combine(history.g_values);
  const Vec cy = combine(history.iterates);
  Vec out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = beta * cg[i] + (1.0 - beta) * cy[i];
  return out;
}

FpResult aa_solve(const FixedPointMap& map, const Vec& y0, int M, int max_iters, double tol) {
  if (M < 0) throw std::invalid_argument("aa_solve: M must be >= 0");
  FpResult res;
  AaHistory hist;
  hist.capacity = M + 1;
  res.y = y0;
  Vec g = map.g(res.y);
  double rnorm = norm2(sub(g, res.y));
  res.trace.iterates.push_back(res.y);
  res.trace.residual_norms.push_back(rnorm);
  hist.push(res.y, g);
  for (int it = 0; it < max_iters; ++it) {
    if (rnorm <= tol) {
      res.converged = true;
      break;
    }
    const AaAlphaResult a = aa_alpha(hist);
    res.trace.alphas.push_back(a.alpha);
    res.y = aa_update(hist, a.alpha, 1.0);
    check_divergence(res.y);
    g = map.g(res.y);
    rnorm = norm2(sub(g, res.y));
    res.trace.iterates.push_back(res.y);
    res.trace.residual_norms.push_back(rnorm);
    hist.push(res.y, g);
    res.iters = it + 1;
  }
  if (rnorm <= tol) res.converged = true;
  return res;
}

// ===========================================================================
// Learned acceleration
// ===========================================================================

MlpSpec LearnedAccelSpec::coeff_net() const {
  MlpSpec spec;
  spec.input_dim = (M + 1) * n + (M + 1);
  spec.hidden_dims = {hidden};
  spec.output_dim = (M + 1) + 1;
  spec.activation = Activation::tanh_act;
  return spec;
}

std::vector<std::pair<std::string, std::vector<int>>> LearnedAccelSpec::param_layout() const {
  std::vector<std::pair<std::string, std::vector<int>>> layout = {
      {"W_init", {n, ctx_dim}}, {"b_init", {n}}};
  for (auto& entry : mlp_param_layout(coeff_net())) layout.push_back(std::move(entry));
  return layout;
}

int LearnedAccelSpec::param_count() const { return layout_size(param_layout()); }

ModelParams learned_accel_init_params(const LearnedAccelSpec& spec, Rng& rng) {
  ModelParams p;
  p.layout = spec.param_layout();
  const double s = 1.0 / std::sqrt(static_cast<double>(spec.ctx_dim));
  for (int i = 0; i < spec.n * spec.ctx_dim; ++i) p.theta.push_back(rng.uniform(-s, s));
  for (int i = 0; i < spec.n; ++i) p.theta.push_back(0.0);
  const ModelParams net = mlp_init_params(spec.coeff_net(), rng);
  p.theta.insert(p.theta.end(), net.theta.begin(), net.theta.end());
  return p;
}

namespace {

constexpr double kNormEps = 1e-24;

struct AccelViews {
  const double* w_init;
  const double* b_init;
  ModelParams net;  // coeff-net slice
};

AccelViews split_accel_params(const LearnedAccelSpec& spec, const ModelParams& params) {
  if (static_cast<int>(params.theta.size()) != spec.param_count())
    throw std::invalid_argument("learned accel: params length does not match spec");
  AccelViews v;
  v.w_init = params.theta.data();
  v.b_init = params.theta.data() + static_cast<std::size_t>(spec.n) * spec.ctx_dim;
  const std::size_t net_off = static_cast<std::size_t>(spec.n) * spec.ctx_dim + spec.n;
  v.net.theta.assign(params.theta.begin() + net_off, params.theta.end());
  v.net.layout = mlp_param_layout(spec.coeff_net());
  return v;
}

// Everything the backward pass needs from one forward run.
struct AccelTape {
  std::vector<Vec> iterates;   // y^0..y^K
  std::vector<Vec> g_values;   // g(y^0)..g(y^K)
  std::vector<Vec> residuals;  // R(y^t)
  std::vector<Vec> features;   // per step
  std::vector<Vec> alphas;     // per step
  std::vector<Vec> pre;        // raw net outputs per step (pre-weights + logit)
  Vec betas;                   // per step
};

// window slot j at step t refers to iterate max(0, t - M + j)
int slot_index(int t, int M, int j) { return std::max(0, t - M + j); }

void accel_forward(const FixedPointMap& map, const LearnedAccelSpec& spec,
                   const ModelParams& params, int K, AccelTape& tape, double tol,
                   bool stop_at_tol, int* iters_to_tol) {
  const AccelViews v = split_accel_params(spec, params);
  const int n = spec.n, M = spec.M;

  Vec y(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double s = v.b_init[i];
    for (int j = 0; j < spec.ctx_dim; ++j)
      s += v.w_init[static_cast<std::size_t>(i) * spec.ctx_dim + j] * map.x.data[j];
    y[i] = s;
  }

  tape.iterates.push_back(y);
  tape.g_values.push_back(map.g(y));
  tape.residuals.push_back(sub(tape.g_values.back(), y));
  if (iters_to_tol) *iters_to_tol = -1;

  for (int t = 0; t < K; ++t) {
    if (stop_at_tol && norm2(tape.residuals.back()) <= tol) break;
    // features: window residual vectors then their smoothed norms
    Vec phi;
    phi.reserve(static_cast<std::size_t>(M + 1) * n + M + 1);
    for (int j = 0; j <= M; ++j) {
      const Vec& r = tape.residuals[slot_index(t, M, j)];
      phi.insert(phi.end(), r.begin(), r.end());
    }
    for (int j = 0; j <= M; ++j)
      phi.push_back(std::sqrt(norm2sq(tape.residuals[slot_index(t, M, j)]) + kNormEps));

    const Vec out = mlp_forward(spec.coeff_net(), v.net, phi);
    Vec pre(out.begin(), out.end() - 1);
    const double logit = out.back();
    Vec alpha(M + 1);
    {
      double mx = pre[0];
      for (double p : pre) mx = std::max(mx, p);
      double s = 0.0;
      for (int j = 0; j <= M; ++j) {
        alpha[j] = std::exp(pre[j] - mx);
        s += alpha[j];
      }
      for (double& a : alpha) a /= s;
    }
    const double beta = 1.0 / (1.0 + std::exp(-logit));

    Vec y_next(n, 0.0);
    for (int j = 0; j <= M; ++j) {
      const int idx = slot_index(t, M, j);
      for (int i = 0; i < n; ++i)
        y_next[i] += alpha[j] * (beta * tape.g_values[idx][i] +
                                 (1.0 - beta) * tape.iterates[idx][i]);
    }
    check_divergence(y_next);

    tape.features.push_back(std::move(phi));
    tape.pre.push_back(std::move(pre));
    tape.alphas.push_back(std::move(alpha));
    tape.betas.push_back(beta);
    tape.iterates.push_back(y_next);
    tape.g_values.push_back(map.g(y_next));
    tape.residuals.push_back(sub(tape.g_values.back(), tape.iterates.back()));
    if (iters_to_tol && *iters_to_tol < 0 && norm2(tape.residuals.back()) <= tol)
      *iters_to_tol = t + 1;
  }
}

}  // namespace

LearnedAccelResult learned_accel_solve(const FixedPointMap& map, const LearnedAccelSpec& spec,
                                       const ModelParams& params, int K, double tol,
                                       bool stop_at_tol) {
  if (K < 1) throw std::invalid_argument("learned_accel_solve: K must be >= 1");
  AccelTape tape;
  int iters_to_tol = -1;
  accel_forward(map, spec, params, K, tape, tol, stop_at_tol, &iters_to_tol);

  LearnedAccelResult res;
  res.y = tape.iterates.back();
  res.iters = static_cast<int>(tape.iterates.size()) - 1;
  res.trace.iterates = std::move(tape.iterates);
  res.trace.alphas = std::move(tape.alphas);
  res.trace.residual_norms.resize(tape.residuals.size());
  for (std::size_t i = 0; i < tape.residuals.size(); ++i)
    res.trace.residual_norms[i] = norm2(tape.residuals[i]);
  res.converged = tol > 0.0 && res.trace.residual_norms.back() <= tol;
  return res;
}

Vec learned_accel_vjp(const FixedPointMap& map, const LearnedAccelSpec& spec,
                      const ModelParams& params, int K,
                      const std::vector<Vec>& iterate_cotangents,
                      const std::vector<Vec>* alpha_cotangents) {
  if (!map.jac_g) throw std::invalid_argument("learned_accel_vjp: map has no Jacobian");
  AccelTape tape;
  accel_forward(map, spec, params, K, tape, 0.0, false, nullptr);
  const AccelViews v = split_accel_params(spec, params);
  const int n = spec.n, M = spec.M;
  const int steps = static_cast<int>(tape.betas.size());
  const MlpSpec net_spec = spec.coeff_net();

  Vec grad(params.theta.size(), 0.0);
  double* d_w_init = grad.data();
  double* d_b_init = grad.data() + static_cast<std::size_t>(n) * spec.ctx_dim;
  Vec d_net(v.net.theta.size(), 0.0);

  std::vector<Vec> lam(steps + 1, Vec(n, 0.0));
  for (int t = 0; t <= steps; ++t)
    if (t < static_cast<int>(iterate_cotangents.size()) && !iterate_cotangents[t].empty())
      lam[t] = iterate_cotangents[t];

  for (int t = steps - 1; t >= 0; --t) {
    const Vec& l = lam[t + 1];
    const Vec& alpha = tape.alphas[t];
    const double beta = tape.betas[t];

    // d beta and d alpha_j of the mixing step
    Vec dalpha(M + 1, 0.0);
    double dbeta = 0.0;
    for (int j = 0; j <= M; ++j) {
      const int idx = slot_index(t, M, j);
      double s_mix = 0.0, s_diff = 0.0;
      for (int i = 0; i < n; ++i) {
        s_mix += l[i] * (beta * tape.g_values[idx][i] + (1.0 - beta) * tape.iterates[idx][i]);
        s_diff += l[i] * (tape.g_values[idx][i] - tape.iterates[idx][i]);
      }
      dalpha[j] = s_mix;
      dbeta += alpha[j] * s_diff;
    }
    if (alpha_cotangents && t < static_cast<int>(alpha_cotangents->size()) &&
        !(*alpha_cotangents)[t].empty())
      for (int j = 0; j <= M; ++j) dalpha[j] += (*alpha_cotangents)[t][j];

    // through softargmax and the sigmoid
    double adot = 0.0;
    for (int j = 0; j <= M; ++j) adot += alpha[j] * dalpha[j];
    Vec dout(M + 2);
    for (int j = 0; j <= M; ++j) dout[j] = alpha[j] * (dalpha[j] - adot);
    dout[M + 1] = beta * (1.0 - beta) * dbeta;

    // through the coefficient net to its parameters and the features
    Vec dphi;
    const Vec dnet_t = mlp_vjp_params(net_spec, v.net, tape.features[t], dout, &dphi);
    axpy(1.0, dnet_t, d_net);

    // features decompose into window residuals and their norms
    for (int j = 0; j <= M; ++j) {
      const int idx = slot_index(t, M, j);
      const Vec& r = tape.residuals[idx];
      Vec dr(dphi.begin() + static_cast<std::size_t>(j) * n,
             dphi.begin() + static_cast<std::size_t>(j + 1) * n);
      const double dnorm = dphi[static_cast<std::size_t>(M + 1) * n + j];
      const double rn = std::sqrt(norm2sq(r) + kNormEps);
      axpy(dnorm / rn, r, dr);

      // y_{t+1} depends on iterate idx directly, through g, and through the
      // residual R = g - y that feeds the features
      Vec through_g(n);
      for (int i = 0; i < n; ++i) through_g[i] = alpha[j] * beta * l[i] + dr[i];
      const Matrix jg = map.jac_g(tape.iterates[idx]);
      const Vec pulled = matvec_t(jg, through_g);
      for (int i = 0; i < n; ++i)
        lam[idx][i] += pulled[i] - dr[i] + alpha[j] * (1.0 - beta) * l[i];
    }
  }

  // initial iterate: affine in the context
  for (int i = 0; i < n; ++i) {
    d_b_init[i] += lam[0][i];
    for (int j = 0; j < spec.ctx_dim; ++j)
      d_w_init[static_cast<std::size_t>(i) * spec.ctx_dim + j] += lam[0][i] * map.x.data[j];
  }
  const std::size_t net_off = static_cast<std::size_t>(n) * spec.ctx_dim + n;
  for (std::size_t i = 0; i < d_net.size(); ++i) grad[net_off + i] += d_net[i];
  return grad;
}

double neuralfp_loss(const IterateTrace& trace, double normalization) {
  if (!(normalization > 0.0))
    throw std::invalid_argument("neuralfp_loss: normalization must be > 0");
  double s = 0.0;
  for (double r : trace.residual_norms) s += r * r;
  return s / normalization;
}

double neuralfp_default_normalization(const IterateTrace& trace) {
  if (trace.residual_norms.empty())
    throw std::invalid_argument("neuralfp_default_normalization: empty trace");
  const double r0 = trace.residual_norms.front();
  return r0 * r0 + 1e-12;
}

Vec neuralfp_grad(const FixedPointMap& map, const LearnedAccelSpec& spec,
                  const ModelParams& params, int K, double normalization) {
  if (!map.jac_g) throw std::invalid_argument("neuralfp_grad: map has no Jacobian");
  AccelTape tape;
  accel_forward(map, spec, params, K, tape, 0.0, false, nullptr);
  const int steps = static_cast<int>(tape.betas.size());
  // dN(y^t)/dy^t = 2 (Dg - I)' R(y^t); the normalization is a constant
  // scale per context
  std::vector<Vec> cots(steps + 1);
  for (int t = 0; t <= steps; ++t) {
    const Matrix jg = map.jac_g(tape.iterates[t]);
    const Vec jr = matvec_t(jg, tape.residuals[t]);
    Vec c(spec.n);
    for (int i = 0; i < spec.n; ++i)
      c[i] = 2.0 * (jr[i] - tape.residuals[t][i]) / normalization;
    cots[t] = std::move(c);
  }
  return learned_accel_vjp(map, spec, params, K, cots, nullptr);
}

double hyperaa_loss(const IterateTrace& trace, const Vec& ystar, const Vec& weights,
                    const std::vector<Vec>& alpha_seq, double reg_weight) {
  if (weights.size() != trace.iterates.size())
    throw std::invalid_argument("hyperaa_loss: weights length must match trace length");
  for (std::size_t i = 1; i < weights.size(); ++i)
    if (weights[i] < weights[i - 1])
      throw std::invalid_argument("hyperaa_loss: weights must be monotone non-decreasing");
  double s = 0.0;
  for (std::size_t t = 0; t < trace.iterates.size(); ++t) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < ystar.size(); ++i) {
      const double d = ystar[i] - trace.iterates[t][i];
      d2 += d * d;
    }
    s += weights[t] * d2;
  }
  if (reg_weight != 0.0) {
    for (const Vec& alpha : alpha_seq) {
      const double uniform = 1.0 / static_cast<double>(alpha.size());
      double d2 = 0.0;
      for (double a : alpha) d2 += (a - uniform) * (a - uniform);
      s += reg_weight * d2;
    }
  }
  return s;
}

double hyperaa_reg_weight(double initial, long epoch, long total_epochs) {
  if (total_epochs <= 1) return 0.0;
  if (epoch >= total_epochs - 1) return 0.0;
  return initial * (1.0 - static_cast<double>(epoch) / static_cast<double>(total_epochs - 1));
}

// ===========================================================================
// Benchmark families
// ===========================================================================

FpFamily make_affine_fp_family(int n, double rho_lo, double rho_hi) {
  if (!(0.0 < rho_lo && rho_lo <= rho_hi && rho_hi < 1.0))
    throw std::invalid_argument("make_affine_fp_family: need 0 < rho_lo <= rho_hi < 1");
  FpFamily fam;
  fam.name = "affine_fp";
  fam.n = n;
  fam.ctx_dim = n * n + n;
  fam.sample = [n, rho_lo, rho_hi](Rng& rng) {
    const Matrix q = random_orthogonal(n, rng);
    Vec lam(n);
    double mx = 0.0;
    for (int i = 0; i < n; ++i) {
      lam[i] = rng.uniform(-1.0, 1.0);
      mx = std::max(mx, std::abs(lam[i]));
    }
    const double rho = rng.uniform(rho_lo, rho_hi);
    const double scale = mx > 0.0 ? rho / mx : 0.0;
    for (double& l : lam) l *= scale;
    ContextVector x;
    x.family_tag = "affine_fp";
    x.data.resize(static_cast<std::size_t>(n) * n + n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += q(i, k) * lam[k] * q(j, k);
        x.data[static_cast<std::size_t>(i) * n + j] = s;
      }
    for (int i = 0; i < n; ++i) x.data[static_cast<std::size_t>(n) * n + i] = rng.normal();
    return x;
  };
  fam.make_map = [n](const ContextVector& x) {
    Matrix a(n, n);
    std::copy(x.data.begin(), x.data.begin() + static_cast<std::size_t>(n) * n, a.data.begin());
    Vec b(x.data.begin() + static_cast<std::size_t>(n) * n, x.data.end());
    FixedPointMap map;
    map.n = n;
    map.x = x;
    map.g = [a, b](const Vec& y) {
      Vec out = matvec(a, y);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
      return out;
    };
    map.jac_g = [a](const Vec&) { return a; };
    return map;
  };
  fam.fixed_point = [n](const ContextVector& x) {
    Matrix ia = Matrix::identity(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) ia(i, j) -= x.data[static_cast<std::size_t>(i) * n + j];
    const Vec b(x.data.begin() + static_cast<std::size_t>(n) * n, x.data.end());
    return lu_solve(ia, b);
  };
  return fam;
}

FpFamily make_tanh_fp_family(int n, std::uint64_t seed) {
  FpFamily fam;
  fam.name = "tanh_fp";
  fam.n = n;
  fam.ctx_dim = n * n + n;
  (void)seed;
  fam.sample = [n](Rng& rng) {
    Matrix w(n, n);
    for (double& e : w.data) e = rng.normal();
    const double on = operator_norm(w);
    if (on > 0.0)
      for (double& e : w.data) e /= on;  // Lipschitz(g) <= 0.9, contraction
    ContextVector x;
    x.family_tag = "tanh_fp";
    x.data = w.data;
    const Vec b = rng.normal_vec(n);
    x.data.insert(x.data.end(), b.begin(), b.end());
    return x;
  };
  fam.make_map = [n](const ContextVector& x) {
    Matrix w(n, n);
    std::copy(x.data.begin(), x.data.begin() + static_cast<std::size_t>(n) * n, w.data.begin());
    Vec b(x.data.begin() + static_cast<std::size_t>(n) * n, x.data.end());
    FixedPointMap map;
    map.n = n;
    map.x = x;
    map.g = [w, b](const Vec& y) {
      Vec wy = matvec(w, y);
      for (std::size_t i = 0; i < wy.size(); ++i) wy[i] = 0.9 * std::tanh(wy[i]) + b[i];
      return wy;
    };
    map.jac_g = [w, n](const Vec& y) {
      const Vec wy = matvec(w, y);
      Matrix j(n, n);
      for (int i = 0; i < n; ++i) {
        const double th = std::tanh(wy[i]);
        const double d = 0.9 * (1.0 - th * th);
        for (int k = 0; k < n; ++k) j(i, k) = d * w(i, k);
      }
      return j;
    };
    return map;
  };
  fam.fixed_point = [fam](const ContextVector& x) {
    const FixedPointMap map = fam.make_map(x);
    return aa_solve(map, Vec(map.n, 0.0), 5, 5000, 1e-13).y;
  };
  return fam;
}

}  // namespace amort
