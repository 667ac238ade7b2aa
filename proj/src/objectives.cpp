#include "amort/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "amort/parallel.hpp"

namespace amort {

// ===========================================================================
// Quadratic family
// ===========================================================================

Matrix quadratic_ctx_matrix(const ContextVector& x, int n) {
  Matrix a(n, n);
  std::copy(x.data.begin(), x.data.begin() + static_cast<std::size_t>(n) * n, a.data.begin());
  return a;
}

Vec quadratic_ctx_rhs(const ContextVector& x, int n) {
  return Vec(x.data.begin() + static_cast<std::size_t>(n) * n, x.data.end());
}

ContextVector pack_quadratic_ctx(const Matrix& a, const Vec& b) {
  ContextVector x;
  x.family_tag = "quadratic";
  x.data = a.data;
  x.data.insert(x.data.end(), b.begin(), b.end());
  return x;
}

Matrix random_orthogonal(int n, Rng& rng) {
  Matrix q(n, n);
  std::vector<Vec> cols;
  cols.reserve(n);
  while (static_cast<int>(cols.size()) < n) {
    Vec v = rng.normal_vec(n);
    for (const Vec& c : cols) axpy(-dot(c, v), c, v);
    const double nv = norm2(v);
    if (nv < 1e-8) continue;  // degenerate draw, resample
    for (double& e : v) e /= nv;
    cols.push_back(std::move(v));
  }
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) q(i, j) = cols[j][i];
  return q;
}

ProblemFamily make_quadratic_family(int n, double eig_lo, double eig_hi) {
  if (!(0.0 < eig_lo && eig_lo <= eig_hi))
    throw std::invalid_argument("make_quadratic_family: need 0 < eig_lo <= eig_hi");

  ProblemFamily fam;
  fam.name = "quadratic";
  fam.n = n;
  fam.ctx_dim = n * n + n;

  fam.eval = [n](const DomainPoint& y, const ContextVector& x) {
    const Matrix a = quadratic_ctx_matrix(x, n);
    const Vec b = quadratic_ctx_rhs(x, n);
    return 0.5 * dot(y, matvec(a, y)) - dot(b, y);
  };
  fam.grad_y = [n](const DomainPoint& y, const ContextVector& x) {
    const Matrix a = quadratic_ctx_matrix(x, n);
    const Vec b = quadratic_ctx_rhs(x, n);
    return sub(matvec(a, y), b);
  };
  fam.hvp_y = [n](const DomainPoint&, const ContextVector& x, const Vec& v) {
    return matvec(quadratic_ctx_matrix(x, n), v);
  };
  fam.sample = [n, eig_lo, eig_hi](Rng& rng) {
    const Matrix q = random_orthogonal(n, rng);
    Vec lam(n);
    for (int i = 0; i < n; ++i) lam[i] = rng.uniform(eig_lo, eig_hi);
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += q(i, k) * lam[k] * q(j, k);
        a(i, j) = s;
      }
    // exact symmetry regardless of accumulation order
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j) {
        const double m = 0.5 * (a(i, j) + a(j, i));
        a(i, j) = m;
        a(j, i) = m;
      }
    return pack_quadratic_ctx(a, rng.normal_vec(n));
  };
  fam.oracle = [n](const ContextVector& x) {
    return cholesky_solve(quadratic_ctx_matrix(x, n), quadratic_ctx_rhs(x, n));
  };
  fam.grad_x = [n](const DomainPoint& y, const ContextVector&) {
    Vec g(static_cast<std::size_t>(n) * n + n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g[static_cast<std::size_t>(i) * n + j] = 0.5 * y[i] * y[j];
    for (int j = 0; j < n; ++j) g[static_cast<std::size_t>(n) * n + j] = -y[j];
    return g;
  };
  fam.cross_jacobian = [n](const DomainPoint& y, const ContextVector&) {
    // d(Ay - b) / d(A_jk) = e_j y_k, d(Ay - b) / d(b_j) = -e_j
    Matrix c(n, n * n + n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) c(j, j * n + k) = y[k];
    for (int j = 0; j < n; ++j) c(j, n * n + j) = -1.0;
    return c;
  };
  return fam;
}

// ===========================================================================
// Sparse coding
// ===========================================================================

Matrix sample_dictionary(int m, int n, Rng& rng) {
  Matrix w(m, n);
  for (double& e : w.data) e = rng.normal();
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += w(i, j) * w(i, j);
    const double nv = std::sqrt(s);
    for (int i = 0; i < m; ++i) w(i, j) /= nv;
  }
  return w;
}

SparseCodingFamilyConfig make_sparse_coding_config(Matrix w_d, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("sparse coding: alpha must be > 0");
  SparseCodingFamilyConfig cfg;
  cfg.W_d = std::move(w_d);
  cfg.alpha = alpha;
  const int n = cfg.W_d.cols;
  auto gram_op = [&](const Vec& v) { return matvec_t(cfg.W_d, matvec(cfg.W_d, v)); };
  cfg.L = 1.01 * power_iteration_lmax(gram_op, n, 200);
  cfg.W_e = Matrix(n, cfg.W_d.rows);
  for (int i = 0; i < cfg.W_d.rows; ++i)
    for (int j = 0; j < n; ++j) cfg.W_e(j, i) = cfg.W_d(i, j) / cfg.L;
  cfg.S = Matrix::identity(n);
  const Matrix we_wd = matmul(cfg.W_e, cfg.W_d);
  for (std::size_t i = 0; i < cfg.S.data.size(); ++i) cfg.S.data[i] -= we_wd.data[i];
  cfg.beta = alpha / cfg.L;
  return cfg;
}

Vec soft_threshold(const Vec& v, double beta) {
  if (beta < 0.0) throw std::invalid_argument("soft_threshold: beta must be >= 0");
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]) - beta;
    out[i] = a > 0.0 ? (v[i] > 0.0 ? a : -a) : 0.0;
  }
  return out;
}

Vec ista_like_step(const Matrix& f, const Matrix& g, double beta, const Vec& x_signal,
                   const Vec& y) {
  Vec pre = matvec(f, x_signal);
  const Vec gy = matvec(g, y);
  for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += gy[i];
  return soft_threshold(pre, beta);
}

double sparse_energy(const Vec& y, const Vec& x_signal, const Matrix& w_d, double alpha) {
  const Vec recon = matvec(w_d, y);
  double q = 0.0;
  for (std::size_t i = 0; i < x_signal.size(); ++i) {
    const double d = x_signal[i] - recon[i];
    q += d * d;
  }
  double l1 = 0.0;
  for (double v : y) l1 += std::abs(v);
  return 0.5 * q + alpha * l1;
}

Vec ista_step(const DomainPoint& y, const ContextVector& x, const SparseCodingFamilyConfig& cfg) {
  if (static_cast<int>(y.size()) != cfg.W_d.cols ||
      static_cast<int>(x.data.size()) != cfg.W_d.rows)
    throw std::invalid_argument("ista_step: shape mismatch");
  return ista_like_step(cfg.W_e, cfg.S, cfg.beta, x.data, y);
}

FistaResult fista_solve(const ContextVector& x, const SparseCodingFamilyConfig& cfg, double tol,
                        int max_iters) {
  if (!(tol > 0.0)) throw std::invalid_argument("fista_solve: tol must be > 0");
  const int n = cfg.W_d.cols;
  FistaResult res;
  Vec y(n, 0.0);
  Vec z = y;
  double t = 1.0;
  res.y = y;
  double best_e = sparse_energy(y, x.data, cfg.W_d, cfg.alpha);
  for (int k = 0; k < max_iters; ++k) {
    const Vec y_new = ista_like_step(cfg.W_e, cfg.S, cfg.beta, x.data, z);
    const double e_new = sparse_energy(y_new, x.data, cfg.W_d, cfg.alpha);
    if (e_new < best_e) {
      best_e = e_new;
      res.y = y_new;
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double mom = (t - 1.0) / t_new;
    Vec z_new(n);
    double change = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = y_new[i] - y[i];
      change += d * d;
      z_new[i] = y_new[i] + mom * d;
    }
    y = y_new;
    z = std::move(z_new);
    t = t_new;
    res.iters = k + 1;
    if (std::sqrt(change) <= tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

namespace {
struct SparseCodingImpl {
  SparseCodingFamilyConfig cfg;
  int k_sparse = 1;
  double noise_sigma = 0.01;
};
}  // namespace

ProblemFamily make_sparse_coding_family(int m, int n, double alpha, std::uint64_t dict_seed) {
  if (m < 1 || n < 1) throw std::invalid_argument("make_sparse_coding_family: m, n must be >= 1");
  Rng dict_rng(dict_seed);
  auto impl = std::make_shared<SparseCodingImpl>();
  impl->cfg = make_sparse_coding_config(sample_dictionary(m, n, dict_rng), alpha);
  impl->k_sparse = (n + 7) / 8;

  ProblemFamily fam;
  fam.name = "sparse_coding";
  fam.n = n;
  fam.ctx_dim = m;
  fam.impl = impl;

  fam.eval = [impl](const DomainPoint& y, const ContextVector& x) {
    return sparse_energy(y, x.data, impl->cfg.W_d, impl->cfg.alpha);
  };
  // Subgradient with sign(0) := 0.
  fam.grad_y = [impl](const DomainPoint& y, const ContextVector& x) {
    const Vec r = sub(matvec(impl->cfg.W_d, y), x.data);
    Vec g = matvec_t(impl->cfg.W_d, r);
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] > 0.0)
        g[i] += impl->cfg.alpha;
      else if (y[i] < 0.0)
        g[i] -= impl->cfg.alpha;
    }
    return g;
  };
  // Hessian of the smooth part; the l1 term is piecewise linear.
  fam.hvp_y = [impl](const DomainPoint&, const ContextVector&, const Vec& v) {
    return matvec_t(impl->cfg.W_d, matvec(impl->cfg.W_d, v));
  };
  fam.sample = [impl, m, n](Rng& rng) {
    Vec code(n, 0.0);
    for (int k = 0; k < impl->k_sparse; ++k) {
      int idx = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n));
      while (code[idx] != 0.0) idx = (idx + 1) % n;
      const double mag = rng.uniform(0.5, 1.5);
      code[idx] = rng.uniform() < 0.5 ? -mag : mag;
    }
    Vec sig = matvec(impl->cfg.W_d, code);
    for (int i = 0; i < m; ++i) sig[i] += impl->noise_sigma * rng.normal();
    ContextVector x;
    x.family_tag = "sparse_coding";
    x.data = std::move(sig);
    return x;
  };
  fam.oracle = [impl](const ContextVector& x) {
    return fista_solve(x, impl->cfg, 1e-12, 20000).y;
  };
  fam.grad_x = [impl](const DomainPoint& y, const ContextVector& x) {
    return sub(x.data, matvec(impl->cfg.W_d, y));
  };
  fam.cross_jacobian = [impl, m, n](const DomainPoint&, const ContextVector&) {
    Matrix c(n, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) c(j, i) = -impl->cfg.W_d(i, j);
    return c;
  };
  // optimality of the l1 composite = fixed point of the ISTA prox step
  fam.stationarity = [impl](const DomainPoint& y, const ContextVector& x) {
    return norm2(sub(ista_like_step(impl->cfg.W_e, impl->cfg.S, impl->cfg.beta, x.data, y), y));
  };
  return fam;
}

const SparseCodingFamilyConfig& sparse_coding_config(const ProblemFamily& family) {
  auto impl = std::static_pointer_cast<const SparseCodingImpl>(family.impl);
  if (!impl || family.name != "sparse_coding")
    throw std::invalid_argument("sparse_coding_config: not a sparse coding family");
  return impl->cfg;
}

// ===========================================================================
// Sphere family
// ===========================================================================

double geodesic_distance(const Vec& a, const Vec& b) {
  if (std::abs(norm2(a) - 1.0) > 1e-9 || std::abs(norm2(b) - 1.0) > 1e-9)
    throw std::invalid_argument("geodesic_distance: inputs must be unit vectors");
  const double t = std::clamp(dot(a, b), -1.0, 1.0);
  return std::acos(t);
}

double softmin(const Vec& values, double gamma) {
  if (values.empty()) throw std::invalid_argument("softmin: empty input");
  if (!(gamma > 0.0)) throw std::invalid_argument("softmin: gamma must be > 0");
  const double lo = *std::min_element(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += std::exp(-(v - lo) / gamma);
  return lo - gamma * std::log(s);
}

namespace {

constexpr double kArccosClamp = 1.0 - 1e-12;

struct SphereImpl {
  SphereFamilyConfig cfg;
};

struct SphereCtx {
  int m;
  const double* z;      // m unit 3-vectors, row-major
  const double* alpha;  // m offsets
};

SphereCtx sphere_view(const ContextVector& x, int m) {
  return SphereCtx{m, x.data.data(), x.data.data() + 3 * m};
}

// Pointwise work shared by eval / grad / hvp. The arccos argument is clamped
// to +-(1 - 1e-12); inside that cap the evaluated objective is flat in the
// capped component, so its gradient and curvature contributions are dropped
// (c = 0) to keep derivatives consistent with the function actually computed.
struct SphereEval {
  double r = 0.0;  // |y|
  Vec u;           // y / r
  Vec t;           // clamped u . z_i
  Vec raw_t;       // unclamped inner products
  Vec w;           // soft-min weights
  Vec c;           // d a_i / d t_i = -1 / (2 sqrt(1 - t^2)); 0 when capped
  std::vector<char> capped;
  double value = 0.0;
};

SphereEval sphere_eval_parts(const SphereCtx& ctx, const Vec& y, double gamma) {
  SphereEval ev;
  ev.r = norm2(y);
  if (ev.r <= 1e-12)
    throw std::runtime_error("sphere objective: evaluation at y = 0 (projection undefined)");
  ev.u = scaled(y, 1.0 / ev.r);
  const int m = ctx.m;
  ev.t.resize(m);
  ev.raw_t.resize(m);
  ev.c.resize(m);
  ev.capped.assign(m, 0);
  Vec a(m);
  for (int i = 0; i < m; ++i) {
    const double raw =
        ev.u[0] * ctx.z[3 * i] + ev.u[1] * ctx.z[3 * i + 1] + ev.u[2] * ctx.z[3 * i + 2];
    ev.raw_t[i] = raw;
    const double t = std::clamp(raw, -kArccosClamp, kArccosClamp);
    ev.t[i] = t;
    ev.capped[i] = raw > kArccosClamp || raw < -kArccosClamp;
    ev.c[i] = ev.capped[i] ? 0.0 : -0.5 / std::sqrt(1.0 - t * t);
    a[i] = 0.5 * std::acos(t) + ctx.alpha[i];
  }
  const double lo = *std::min_element(a.begin(), a.end());
  ev.w.resize(m);
  double s = 0.0;
  for (int i = 0; i < m; ++i) {
    ev.w[i] = std::exp(-(a[i] - lo) / gamma);
    s += ev.w[i];
  }
  for (int i = 0; i < m; ++i) ev.w[i] /= s;
  ev.value = lo - gamma * std::log(s);
  return ev;
}

// Ambient-space gradient of the soft-min before the projection Jacobian.
Vec sphere_gu(const SphereCtx& ctx, const SphereEval& ev) {
  Vec g(3, 0.0);
  for (int i = 0; i < ctx.m; ++i) {
    const double wc = ev.w[i] * ev.c[i];
    g[0] += wc * ctx.z[3 * i];
    g[1] += wc * ctx.z[3 * i + 1];
    g[2] += wc * ctx.z[3 * i + 2];
  }
  return g;
}

Vec project_tangent(const Vec& u, const Vec& g, double r) {
  const double ug = dot(u, g);
  Vec out(3);
  for (int i = 0; i < 3; ++i) out[i] = (g[i] - ug * u[i]) / r;
  return out;
}

}  // namespace

std::vector<Vec> fibonacci_sphere(int count) {
  std::vector<Vec> pts;
  pts.reserve(count);
  const double golden = 3.14159265358979323846 * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / count;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    pts.push_back({rho * std::cos(phi), rho * std::sin(phi), z});
  }
  return pts;
}

ProblemFamily make_sphere_family(const SphereFamilyConfig& cfg) {
  if (cfg.m < 1 || !(cfg.gamma > 0.0) || cfg.var_beta < 0.0)
    throw std::invalid_argument("make_sphere_family: need m >= 1, gamma > 0, var_beta >= 0");
  auto impl = std::make_shared<SphereImpl>();
  impl->cfg = cfg;

  ProblemFamily fam;
  fam.name = "sphere";
  fam.n = 3;
  fam.ctx_dim = 4 * cfg.m;
  fam.impl = impl;

  fam.eval = [impl](const DomainPoint& y, const ContextVector& x) {
    const SphereCtx ctx = sphere_view(x, impl->cfg.m);
    return sphere_eval_parts(ctx, y, impl->cfg.gamma).value;
  };

  fam.grad_y = [impl](const DomainPoint& y, const ContextVector& x) {
    const SphereCtx ctx = sphere_view(x, impl->cfg.m);
    const SphereEval ev = sphere_eval_parts(ctx, y, impl->cfg.gamma);
    return project_tangent(ev.u, sphere_gu(ctx, ev), ev.r);
  };

  // Hessian of f = F(u(y)): J H_u J + curvature of the normalization map,
  // with J = (I - uu')/r. H_u combines the arccos curvature and the
  // soft-min weight coupling.
  fam.hvp_y = [impl](const DomainPoint& y, const ContextVector& x, const Vec& v) {
    const SphereCtx ctx = sphere_view(x, impl->cfg.m);
    const double gamma = impl->cfg.gamma;
    const SphereEval ev = sphere_eval_parts(ctx, y, impl->cfg.gamma);
    const Vec g = sphere_gu(ctx, ev);

    const Vec jv = project_tangent(ev.u, v, ev.r);
    // H_u jv
    Vec hjv(3, 0.0);
    double gz_dot = 0.0;  // g . jv for the rank-one soft-min term
    for (int i = 0; i < 3; ++i) gz_dot += g[i] * jv[i];
    for (int i = 0; i < ctx.m; ++i) {
      if (ev.capped[i]) continue;
      const double zi[3] = {ctx.z[3 * i], ctx.z[3 * i + 1], ctx.z[3 * i + 2]};
      const double zdot = zi[0] * jv[0] + zi[1] * jv[1] + zi[2] * jv[2];
      const double ti = ev.t[i];
      const double cprime = -0.5 * ti / std::pow(1.0 - ti * ti, 1.5);
      const double coef = ev.w[i] * (cprime - ev.c[i] * ev.c[i] / gamma) * zdot;
      hjv[0] += coef * zi[0];
      hjv[1] += coef * zi[1];
      hjv[2] += coef * zi[2];
    }
    for (int i = 0; i < 3; ++i) hjv[i] += (gz_dot / gamma) * g[i];
    Vec out = project_tangent(ev.u, hjv, ev.r);

    // curvature of u(y) = y/|y| contracted with g
    const double ug = dot(ev.u, g);
    const double uv = dot(ev.u, v);
    const double gv = dot(g, v);
    const double inv_r2 = 1.0 / (ev.r * ev.r);
    for (int i = 0; i < 3; ++i)
      out[i] += inv_r2 * (-g[i] * uv - ev.u[i] * gv - ug * v[i] + 3.0 * ug * uv * ev.u[i]);
    return out;
  };

  fam.sample = [impl](Rng& rng) {
    ContextVector x;
    x.family_tag = "sphere";
    const int m = impl->cfg.m;
    x.data.resize(4 * m);
    for (int i = 0; i < m; ++i) {
      Vec z = rng.normal_vec(3);
      double nz = norm2(z);
      while (nz < 1e-8) {
        z = rng.normal_vec(3);
        nz = norm2(z);
      }
      for (int k = 0; k < 3; ++k) x.data[3 * i + k] = z[k] / nz;
    }
    const double sd = std::sqrt(impl->cfg.var_beta);
    for (int i = 0; i < m; ++i) x.data[3 * m + i] = sd * rng.normal();
    return x;
  };

  fam.oracle = [impl, fam_eval = fam.eval, fam_grad = fam.grad_y](const ContextVector& x) {
    thread_local std::vector<Vec> local_grid;
    if (static_cast<int>(local_grid.size()) != impl->cfg.oracle_grid)
      local_grid = fibonacci_sphere(impl->cfg.oracle_grid);

    int best = 0;
    double best_f = fam_eval(local_grid[0], x);
    for (int i = 1; i < impl->cfg.oracle_grid; ++i) {
      const double f = fam_eval(local_grid[i], x);
      if (f < best_f) {
        best_f = f;
        best = i;
      }
    }
    Vec y = local_grid[best];
    // projected-gradient polish with Armijo backtracking
    for (int it = 0; it < impl->cfg.oracle_refine; ++it) {
      const Vec g = fam_grad(y, x);
      const double g2 = norm2sq(g);
      if (g2 < 1e-28) break;
      const double f0 = fam_eval(y, x);
      double eta = 0.5;
      bool accepted = false;
      while (eta > 1e-14) {
        Vec cand(3);
        for (int k = 0; k < 3; ++k) cand[k] = y[k] - eta * g[k];
        const double nc = norm2(cand);
        if (nc > 1e-12) {
          for (int k = 0; k < 3; ++k) cand[k] /= nc;
          if (fam_eval(cand, x) <= f0 - 1e-4 * eta * g2) {
            y = cand;
            accepted = true;
            break;
          }
        }
        eta *= 0.5;
      }
      if (!accepted) break;
    }
    return y;
  };

  fam.grad_x = [impl](const DomainPoint& y, const ContextVector& x) {
    const SphereCtx ctx = sphere_view(x, impl->cfg.m);
    const SphereEval ev = sphere_eval_parts(ctx, y, impl->cfg.gamma);
    Vec g(4 * ctx.m, 0.0);
    for (int i = 0; i < ctx.m; ++i) {
      const double wc = ev.w[i] * ev.c[i];
      for (int k = 0; k < 3; ++k) g[3 * i + k] = wc * ev.u[k];
      g[3 * ctx.m + i] = ev.w[i];
    }
    return g;
  };

  // First-order optimality with the arccos cones treated as subdifferentials:
  // a minimizer sitting on a component vertex z_j is stationary when the pull
  // of the remaining components stays inside the vertex term's subgradient
  // disc of radius w_j / 2.
  fam.stationarity = [impl](const DomainPoint& y, const ContextVector& x) {
    const SphereCtx ctx = sphere_view(x, impl->cfg.m);
    const SphereEval ev = sphere_eval_parts(ctx, y, impl->cfg.gamma);
    constexpr double kVertexMargin = 1e-9;
    double w_vertex = 0.0;
    Vec g(3, 0.0);
    for (int i = 0; i < ctx.m; ++i) {
      if (std::abs(ev.raw_t[i]) > 1.0 - kVertexMargin) {
        w_vertex += ev.w[i];
        continue;
      }
      const double wc = ev.w[i] * ev.c[i];
      for (int k = 0; k < 3; ++k) g[k] += wc * ctx.z[3 * i + k];
    }
    const double pull = norm2(project_tangent(ev.u, g, ev.r));
    return std::max(0.0, pull - 0.5 * w_vertex / ev.r);
  };
  return fam;
}

// ===========================================================================
// Max-Q family
// ===========================================================================

namespace {
struct MaxQImpl {
  Matrix p;  // control_dim x control_dim, SPD
  Matrix r;  // control_dim x state_dim
};
}  // namespace

ProblemFamily make_maxq_family(int state_dim, int control_dim, std::uint64_t seed) {
  if (state_dim < 1 || control_dim < 1)
    throw std::invalid_argument("make_maxq_family: dims must be >= 1");
  Rng rng(seed);
  auto impl = std::make_shared<MaxQImpl>();
  const Matrix q = random_orthogonal(control_dim, rng);
  Vec lam(control_dim);
  for (int i = 0; i < control_dim; ++i) lam[i] = rng.uniform(0.5, 2.0);
  impl->p = Matrix(control_dim, control_dim);
  for (int i = 0; i < control_dim; ++i)
    for (int j = 0; j <= i; ++j) {
      double s = 0.0;
      for (int k = 0; k < control_dim; ++k) s += q(i, k) * lam[k] * q(j, k);
      impl->p(i, j) = s;
      impl->p(j, i) = s;
    }
  impl->r = Matrix(control_dim, state_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(state_dim));
  for (double& e : impl->r.data) e = scale * rng.normal();

  ProblemFamily fam;
  fam.name = "maxq";
  fam.n = control_dim;
  fam.ctx_dim = state_dim;
  fam.impl = impl;

  fam.eval = [impl](const DomainPoint& y, const ContextVector& x) {
    return 0.5 * dot(y, matvec(impl->p, y)) - dot(y, matvec(impl->r, x.data));
  };
  fam.grad_y = [impl](const DomainPoint& y, const ContextVector& x) {
    return sub(matvec(impl->p, y), matvec(impl->r, x.data));
  };
  fam.hvp_y = [impl](const DomainPoint&, const ContextVector&, const Vec& v) {
    return matvec(impl->p, v);
  };
  fam.sample = [state_dim](Rng& rng2) {
    ContextVector x;
    x.family_tag = "maxq";
    x.data = rng2.normal_vec(state_dim);
    return x;
  };
  fam.oracle = [impl](const ContextVector& x) {
    return cholesky_solve(impl->p, matvec(impl->r, x.data));
  };
  fam.grad_x = [impl](const DomainPoint& y, const ContextVector&) {
    return scaled(matvec_t(impl->r, y), -1.0);
  };
  fam.cross_jacobian = [impl](const DomainPoint&, const ContextVector&) {
    Matrix c = impl->r;
    for (double& e : c.data) e = -e;
    return c;
  };
  return fam;
}

const Matrix& maxq_p_matrix(const ProblemFamily& family) {
  auto impl = std::static_pointer_cast<const MaxQImpl>(family.impl);
  if (!impl || family.name != "maxq")
    throw std::invalid_argument("maxq_p_matrix: not a maxq family");
  return impl->p;
}

const Matrix& maxq_r_matrix(const ProblemFamily& family) {
  auto impl = std::static_pointer_cast<const MaxQImpl>(family.impl);
  if (!impl || family.name != "maxq")
    throw std::invalid_argument("maxq_r_matrix: not a maxq family");
  return impl->r;
}

}  // namespace amort
