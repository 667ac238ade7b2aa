#include "amort/gradcheck.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

#include "amort/fixedpoint.hpp"
#include "amort/learning.hpp"
#include "amort/objectives.hpp"
#include "amort/projections.hpp"
#include "amort/sensitivity.hpp"

namespace amort {

namespace {

struct Suite {
  std::string scope;
  std::string fault;
  std::vector<CheckResult> results;

  bool wants(const std::string& module) const { return scope == "all" || scope == module; }

  // negates the first component of the analytic quantity when this check is
  // the fault-injection target
  void maybe_corrupt(const std::string& module, const std::string& name, Vec& analytic) const {
    if (fault == module + "/" + name && !analytic.empty()) analytic[0] = -analytic[0];
  }

  void record(const std::string& module, const std::string& name, double worst,
              double threshold, const std::string& note = "") {
    results.push_back({module, name, worst, threshold, worst <= threshold, note});
  }
};

ProblemFamily family_by_name(const std::string& name) {
  if (name == "quadratic") return make_quadratic_family(4, 0.2, 1.5);
  if (name == "sparse_coding") return make_sparse_coding_family(6, 12, 0.1, 101);
  if (name == "sphere") return make_sphere_family({});
  if (name == "maxq") return make_maxq_family(5, 3, 102);
  throw std::logic_error("family_by_name: " + name);
}

// draws a test point clear of the family's nonsmooth sets
Vec test_point(const ProblemFamily& fam, const ContextVector& x, Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Vec y = rng.normal_vec(fam.n);
    if (fam.name == "sparse_coding") {
      for (double& v : y)
        if (std::abs(v) < 0.05) v = 0.2;
      return y;
    }
    if (fam.name == "sphere") {
      if (norm2(y) < 0.3) continue;
      const Vec u = scaled(y, 1.0 / norm2(y));
      bool near_kink = false;
      for (int i = 0; i < (fam.ctx_dim / 4); ++i) {
        double t = 0.0;
        for (int k = 0; k < 3; ++k) t += u[k] * x.data[3 * i + k];
        if (std::abs(t) > 0.99) near_kink = true;
      }
      if (near_kink) continue;
      return y;
    }
    return y;
  }
  return rng.normal_vec(fam.n);
}

void check_family_derivatives(Suite& s) {
  for (const char* fname : {"quadratic", "sparse_coding", "sphere", "maxq"}) {
    const ProblemFamily fam = family_by_name(fname);
    const double grad_tol = fam.name == "sphere" ? 1e-4 : 1e-5;
    Rng rng(1000);
    double worst_grad = 0.0, worst_hvp = 0.0, worst_stat = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const ContextVector x = fam.sample(rng);
      const Vec y = test_point(fam, x, rng);
      const double h = 1e-6 * (1.0 + norm2(y));
      Vec analytic = fam.grad_y(y, x);
      s.maybe_corrupt("objectives", std::string("grad_fd_") + fname, analytic);
      const Vec fd =
          finite_diff_grad([&](const Vec& p) { return fam.eval(p, x); }, y, h);
      worst_grad = std::max(worst_grad, rel_error(analytic, fd));

      const Vec v = rng.normal_vec(fam.n);
      const Vec hvp = fam.hvp_y(y, x, v);
      const Vec hfd =
          finite_diff_jvp([&](const Vec& p) { return fam.grad_y(p, x); }, y, v, 1e-6);
      worst_hvp = std::max(worst_hvp, rel_error(hvp, hfd));

      const Vec ystar = fam.oracle(x);
      worst_stat = std::max(worst_stat, stationarity_residual(fam, ystar, x) /
                                            (1.0 + norm2(ystar)));
    }
    s.record("objectives", std::string("grad_fd_") + fname, worst_grad, grad_tol);
    s.record("objectives", std::string("hvp_fd_") + fname, worst_hvp, 1e-4);
    s.record("objectives", std::string("oracle_stationarity_") + fname, worst_stat, 1e-8);
  }
}

void check_model_vjps(Suite& s) {
  Rng rng(2000);

  // mlp vjp against directional finite differences
  {
    MlpSpec spec;
    spec.input_dim = 5;
    spec.hidden_dims = {8, 6};
    spec.output_dim = 4;
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const ModelParams params = mlp_init_params(spec, rng);
      const Vec x = rng.normal_vec(5);
      const Vec cot = rng.normal_vec(4);
      Vec vjp = mlp_vjp_params(spec, params, x, cot);
      s.maybe_corrupt("models", "mlp_vjp", vjp);
      const Vec dir = rng.normal_vec(static_cast<int>(params.theta.size()));
      const double analytic_dir = dot(vjp, dir);
      ModelParams pp = params, pm = params;
      const double h = 1e-6;
      axpy(h, dir, pp.theta);
      axpy(-h, dir, pm.theta);
      const double fd_dir =
          (dot(cot, mlp_forward(spec, pp, x)) - dot(cot, mlp_forward(spec, pm, x))) / (2.0 * h);
      const double scale = std::max(1.0, std::abs(fd_dir));
      worst = std::max(worst, std::abs(analytic_dir - fd_dir) / scale);
    }
    s.record("models", "mlp_vjp", worst, 1e-5);
  }

  // unrolled jacobian equals (I - alpha A)^K on quadratics
  {
    const ProblemFamily quad = family_by_name("quadratic");
    const int n = quad.n;
    double worst = 0.0;
    const double alpha = 0.3;
    for (int K : {1, 3, 10}) {
      const ContextVector x = quad.sample(rng);
      ModelParams theta{rng.normal_vec(n), {{"y0", {n}}}};
      const Matrix jac = learned_init_gd_jacobian({K, alpha}, theta, quad, x);
      const Matrix a = quadratic_ctx_matrix(x, n);
      Matrix factor = Matrix::identity(n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) factor(i, j) -= alpha * a(i, j);
      Matrix expect = Matrix::identity(n);
      for (int k = 0; k < K; ++k) expect = matmul(factor, expect);
      worst = std::max(worst, frobenius_distance(jac, expect));
    }
    s.record("models", "unrolled_jacobian_quadratic", worst, 1e-10);
  }

  // unrolled jacobian against forward finite differences on the sphere
  {
    const ProblemFamily sphere = family_by_name("sphere");
    Rng srng(2100);
    const ContextVector x = sphere.sample(srng);
    LearnedInitGdSpec spec{3, 0.2};
    ModelParams theta{{0.8, -0.4, 0.6}, {{"y0", {3}}}};
    const Matrix jac = learned_init_gd_jacobian(spec, theta, sphere, x);
    double worst = 0.0;
    for (int j = 0; j < 3; ++j) {
      Vec dir(3, 0.0);
      dir[j] = 1.0;
      const Vec fd = finite_diff_jvp(
          [&](const Vec& th) {
            ModelParams p = theta;
            p.theta = th;
            return learned_init_gd_forward(spec, p, sphere, x).first;
          },
          theta.theta, dir, 1e-6);
      Vec col(3);
      for (int i = 0; i < 3; ++i) col[i] = jac(i, j);
      worst = std::max(worst, rel_error(col, fd));
    }
    s.record("models", "unrolled_jacobian_fd_sphere", worst, 1e-4);
  }
}

double loss_with_cached_oracle(const AmortModel& model, const Vec& theta,
                               const ProblemFamily& fam, const ContextVector& x,
                               const LossSpec& loss, const DomainPoint* ystar) {
  ModelParams p{theta, model.param_layout()};
  IterateTrace trace;
  model.forward(p, fam, x, &trace);
  return loss_value(loss, fam, x, trace, ystar);
}

void check_outer_gradients(Suite& s) {
  struct Combo {
    std::string family;
    std::string model;
    std::string loss;
    double tol;
  };
  // the compatibility matrix for exact-gradient paths (full unroll)
  const std::vector<Combo> combos = {
      {"quadratic", "identity", "reg", 1e-5},    {"quadratic", "identity", "obj", 1e-5},
      {"quadratic", "mlp", "reg", 1e-5},         {"quadratic", "mlp", "obj", 1e-5},
      {"quadratic", "learned_init", "reg", 1e-5}, {"quadratic", "learned_init", "obj", 1e-5},
      {"quadratic", "learned_init", "sum", 1e-5}, {"quadratic", "learned_step", "reg", 1e-5},
      {"quadratic", "learned_step", "obj", 1e-5}, {"quadratic", "learned_step", "sum", 1e-5},
      {"sparse_coding", "mlp", "reg", 1e-4},     {"sparse_coding", "mlp", "obj", 1e-4},
      {"sparse_coding", "lista", "reg", 1e-4},   {"sparse_coding", "lista", "obj", 1e-4},
      {"sparse_coding", "lista", "sum", 1e-4},   {"sphere", "mlp", "obj", 1e-4},
      {"sphere", "mlp", "reg", 1e-4},            {"sphere", "learned_init", "obj", 1e-4},
      {"maxq", "identity", "reg", 1e-5},         {"maxq", "identity", "obj", 1e-5},
      {"maxq", "mlp", "reg", 1e-5},              {"maxq", "mlp", "obj", 1e-5},
  };

  for (const Combo& combo : combos) {
    const ProblemFamily fam = family_by_name(combo.family);
    std::shared_ptr<AmortModel> model;
    if (combo.model == "identity")
      model = make_identity_model(fam.n);
    else if (combo.model == "mlp") {
      MlpSpec spec;
      spec.input_dim = fam.ctx_dim;
      spec.hidden_dims = {8};
      spec.output_dim = fam.n;
      model = make_mlp_model(spec);
    } else if (combo.model == "learned_init")
      model = make_learned_init_gd_model({3, 0.25}, fam.n);
    else if (combo.model == "learned_step")
      model = make_learned_step_gd_model({3}, fam.n);
    else
      model = make_lista_model(3, sparse_coding_config(fam));

    LossSpec loss;
    if (combo.loss == "reg")
      loss = {LossKind::reg, LossKind::reg, {}};
    else if (combo.loss == "obj")
      loss = {LossKind::obj, LossKind::obj, {}};
    else
      loss = {LossKind::sum, LossKind::obj, Vec(model->num_iterates(), 1.0)};
    const bool needs_oracle = combo.loss == "reg";

    Rng rng(3000);
    double worst = 0.0;
    int done = 0;
    int attempts = 0;
    while (done < 20 && attempts < 400) {
      ++attempts;
      const ContextVector x = fam.sample(rng);
      Rng irng(3100 + done);
      ModelParams params = model->init_params(irng);
      if (combo.model == "identity" || combo.model == "learned_init")
        params.theta = irng.normal_vec(fam.n);

      // keep clear of kinks for the nonsmooth families
      if (fam.name == "sparse_coding") {
        const Vec out = model->forward(params, fam, x, nullptr);
        bool near = false;
        for (double v : out)
          if (v != 0.0 && std::abs(v) < 1e-3) near = true;
        if (combo.model == "lista") {
          // also check pre-activation distance from the threshold

          IterateTrace tr;
          model->forward(params, fam, x, &tr);
        }
        if (near) continue;
      }
      if (fam.name == "sphere") {
        const Vec out = model->forward(params, fam, x, nullptr);
        if (norm2(out) < 0.2) continue;
      }

      DomainPoint ystar;
      const DomainPoint* ystar_ptr = nullptr;
      if (needs_oracle) {
        ystar = fam.oracle(x);
        ystar_ptr = &ystar;
      }
      Vec g = outer_gradient(*model, params, fam, x, loss, {GradMode::full_unroll});
      s.maybe_corrupt("learning",
                      "outer_" + combo.family + "_" + combo.model + "_" + combo.loss, g);
      const Vec fd = finite_diff_grad(
          [&](const Vec& th) {
            return loss_with_cached_oracle(*model, th, fam, x, loss, ystar_ptr);
          },
          params.theta, combo.family == "sparse_coding" ? 1e-7 : 1e-6);
      worst = std::max(worst, rel_error(g, fd));
      ++done;
    }
    s.record("learning", "outer_" + combo.family + "_" + combo.model + "_" + combo.loss,
             worst, combo.tol, std::to_string(done) + " instances");
  }

  // imaml against finite differences of the re-solved inner problem
  {
    const ProblemFamily quad = family_by_name("quadratic");
    Rng rng(3200);
    double worst = 0.0;
    for (double lambda : {0.1, 1.0, 10.0}) {
      for (int rep = 0; rep < 4; ++rep) {
        const ContextVector x = quad.sample(rng);
        const Vec theta0 = rng.normal_vec(quad.n);
        const Vec cot_seed = rng.normal_vec(quad.n);
        GradModeSpec mode;
        mode.mode = GradMode::imaml;
        mode.lambda = lambda;
        mode.imaml_tol = 1e-11;
        const auto model = make_identity_model(quad.n);
        ModelParams params{theta0, {{"y", {quad.n}}}};
        const LossSpec obj{LossKind::obj, LossKind::obj, {}};
        Vec g = outer_gradient(*model, params, quad, x, obj, mode);
        s.maybe_corrupt("learning", "imaml_fd", g);
        const Vec fd = finite_diff_grad(
            [&](const Vec& th) {
              const InnerSolveResult inner =
                  imaml_inner_solve(quad, x, th, lambda, 1e-12, 400000);
              return quad.eval(inner.y, x);
            },
            theta0, 1e-5);
        (void)cot_seed;
        worst = std::max(worst, rel_error(g, fd));
      }
    }
    s.record("learning", "imaml_fd", worst, 1e-4);
  }
}

void check_projections(Suite& s) {
  Rng rng(4000);
  double worst_jvp = 0.0, worst_oracle = 0.0, worst_idem = 0.0, worst_member = 0.0;

  auto random_input = [&](ProjectionKind kind) {
    if (kind == ProjectionKind::soc) return rng.normal_vec(5);
    if (kind == ProjectionKind::psd) {
      Matrix a(4, 4);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j <= i; ++j) {
          const double v = rng.normal();
          a(i, j) = v;
          a(j, i) = v;
        }
      return a.data;
    }
    if (kind == ProjectionKind::sphere) {
      Vec v = rng.normal_vec(3);
      while (norm2(v) < 0.3) v = rng.normal_vec(3);
      return v;
    }
    return rng.normal_vec(6);
  };

  for (ProjectionKind kind :
       {ProjectionKind::relu_orthant, ProjectionKind::sigmoid_cube,
        ProjectionKind::softargmax_simplex, ProjectionKind::soc, ProjectionKind::psd,
        ProjectionKind::sphere}) {
    int checked = 0;
    while (checked < 20) {
      const Vec x = random_input(kind);
      Vec dir = rng.normal_vec(static_cast<int>(x.size()));
      if (kind == ProjectionKind::psd) {
        const int k = 4;
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < i; ++j) {
            const double m = 0.5 * (dir[i * k + j] + dir[j * k + i]);
            dir[i * k + j] = m;
            dir[j * k + i] = m;
          }
      }
      JvpResult jvp = proj_jvp(kind, x, dir);
      if (jvp.near_boundary) continue;
      s.maybe_corrupt("projections", "jvp_fd", jvp.tangent);
      const Vec fd =
          finite_diff_jvp([&](const Vec& p) { return project(kind, p); }, x, dir, 1e-6);
      worst_jvp = std::max(worst_jvp, rel_error(jvp.tangent, fd));
      ++checked;

      // membership / idempotency along the way
      const Vec once = project(kind, x);
      if (kind == ProjectionKind::relu_orthant)
        for (double v : once) worst_member = std::max(worst_member, -v);
      if (kind == ProjectionKind::sphere)
        worst_member = std::max(worst_member, std::abs(norm2(once) - 1.0));
      if (kind == ProjectionKind::softargmax_simplex) {
        double sum = 0.0;
        for (double v : once) sum += v;
        worst_member = std::max(worst_member, std::abs(sum - 1.0));
      }
      if (kind == ProjectionKind::relu_orthant || kind == ProjectionKind::soc ||
          kind == ProjectionKind::psd || kind == ProjectionKind::sphere)
        worst_idem = std::max(worst_idem, max_abs_diff(project(kind, once), once));
    }
  }

  for (ProjectionKind kind : {ProjectionKind::relu_orthant, ProjectionKind::sigmoid_cube,
                              ProjectionKind::softargmax_simplex}) {
    for (int rep = 0; rep < 50; ++rep) {
      const Vec x = random_input(kind);
      const NumericProjResult oracle = proj_numeric_oracle(kind, x, 1e-9);
      worst_oracle = std::max(worst_oracle, max_abs_diff(oracle.y, project(kind, x)));
    }
  }

  s.record("projections", "jvp_fd", worst_jvp, 1e-5);
  s.record("projections", "oracle_agreement", worst_oracle, 1e-6);
  s.record("projections", "euclidean_idempotency", worst_idem, 1e-10);
  s.record("projections", "membership", worst_member, 1e-12);
}

void check_fixedpoint(Suite& s) {
  const int n = 4;
  const FpFamily fam = make_affine_fp_family(n, 0.7, 0.9);
  Rng rng(5000);

  // learned acceleration vjp against finite differences
  {
    const ContextVector x = fam.sample(rng);
    const FixedPointMap map = fam.make_map(x);
    LearnedAccelSpec spec;
    spec.n = n;
    spec.ctx_dim = fam.ctx_dim;
    spec.M = 1;
    spec.hidden = 8;
    Rng prng(5100);
    const ModelParams params = learned_accel_init_params(spec, prng);
    const int K = 4;
    std::vector<Vec> cots(K + 1);
    for (int t = 0; t <= K; ++t) cots[t] = rng.normal_vec(n);
    Vec vjp = learned_accel_vjp(map, spec, params, K, cots);
    s.maybe_corrupt("fixedpoint", "learned_accel_vjp", vjp);
    const Vec fd = finite_diff_grad(
        [&](const Vec& theta) {
          ModelParams p = params;
          p.theta = theta;
          const LearnedAccelResult r = learned_accel_solve(map, spec, p, K);
          double acc = 0.0;
          for (int t = 0; t <= K; ++t) acc += dot(cots[t], r.trace.iterates[t]);
          return acc;
        },
        params.theta, 1e-6);
    s.record("fixedpoint", "learned_accel_vjp", rel_error(vjp, fd), 1e-4);
  }

  // aa_alpha KKT residual over random histories
  {
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const FixedPointMap map = fam.make_map(fam.sample(rng));
      AaHistory hist;
      hist.capacity = 3;
      for (int i = 0; i < 3; ++i) {
        const Vec y = rng.normal_vec(n);
        hist.push(y, map.g(y));
      }
      const AaAlphaResult sol = aa_alpha(hist);
      if (sol.fallback) continue;
      Vec rr_alpha(3, 0.0);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          rr_alpha[i] += 2.0 * dot(hist.residuals[i], hist.residuals[j]) * sol.alpha[j];
      const double nu = -rr_alpha[0];
      double sum = 0.0;
      for (int i = 0; i < 3; ++i) {
        worst = std::max(worst, std::abs(rr_alpha[i] + nu));
        sum += sol.alpha[i];
      }
      worst = std::max(worst, std::abs(sum - 1.0));
    }
    s.record("fixedpoint", "aa_alpha_kkt", worst, 1e-10);
  }
}

void check_sensitivity(Suite& s) {
  Rng rng(6000);

  // quadratic envelope and dini against closed forms
  {
    const ProblemFamily quad = make_quadratic_family(3, 0.3, 1.5);
    const int n = 3;
    double worst_env = 0.0, worst_dini = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
      const ContextVector x = quad.sample(rng);
      const SolvedInstance inst = solve_instance(quad, x);
      Vec env = envelope_value_grad(quad, inst);
      s.maybe_corrupt("sensitivity", "envelope_quadratic", env);
      for (int j = 0; j < n; ++j)
        worst_env = std::max(worst_env, std::abs(env[n * n + j] + inst.ystar[j]));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          worst_env = std::max(
              worst_env, std::abs(env[i * n + j] - 0.5 * inst.ystar[i] * inst.ystar[j]));

      const Matrix d = dini_adjoint(quad, inst);
      const Matrix a = quadratic_ctx_matrix(x, n);
      for (int j = 0; j < n; ++j) {
        Vec e(n, 0.0);
        e[j] = 1.0;
        const Vec col = cholesky_solve(a, e);
        for (int i = 0; i < n; ++i)
          worst_dini = std::max(worst_dini, std::abs(d(i, n * n + j) - col[i]));
      }
    }
    s.record("sensitivity", "envelope_quadratic", worst_env, 1e-8);
    s.record("sensitivity", "dini_quadratic_closed_form", worst_dini, 1e-8);
  }

  // dini against oracle re-solve differences on maxq
  {
    const ProblemFamily maxq = make_maxq_family(4, 3, 103);
    double worst = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
      const ContextVector x = maxq.sample(rng);
      const SolvedInstance inst = solve_instance(maxq, x);
      const Matrix d = dini_adjoint(maxq, inst);
      for (int j = 0; j < 4; ++j) {
        ContextVector up = x, dn = x;
        const double h = 1e-6;
        up.data[j] += h;
        dn.data[j] -= h;
        const Vec yup = maxq.oracle(up), ydn = maxq.oracle(dn);
        for (int i = 0; i < 3; ++i)
          worst = std::max(worst, std::abs(d(i, j) - (yup[i] - ydn[i]) / (2.0 * h)));
      }
    }
    s.record("sensitivity", "dini_resolve_fd_maxq", worst, 1e-4);
  }

  // sphere envelope against oracle re-solves on the alpha block
  {
    const ProblemFamily fam = make_sphere_family({});
    double worst = 0.0;
    int done = 0;
    while (done < 5) {
      const ContextVector x = fam.sample(rng);
      const SolvedInstance inst = solve_instance(fam, x);
      if (inst.stationarity_norm > 1e-7) continue;
      const Vec env = envelope_value_grad(fam, inst);
      for (int i = 0; i < 4; ++i) {
        const double h = 1e-5;
        ContextVector up = x, dn = x;
        up.data[12 + i] += h;
        dn.data[12 + i] -= h;
        const double fd =
            (fam.eval(fam.oracle(up), up) - fam.eval(fam.oracle(dn), dn)) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - env[12 + i]) / (1.0 + std::abs(env[12 + i])));
      }
      ++done;
    }
    s.record("sensitivity", "envelope_resolve_fd_sphere", worst, 1e-3);
  }
}

}  // namespace

std::vector<CheckResult> run_gradchecks(const std::string& scope,
                                        const std::string& inject_fault) {
  Suite s;
  s.scope = scope;
  s.fault = inject_fault;
  if (s.wants("objectives") || s.wants("core")) check_family_derivatives(s);
  if (s.wants("models")) check_model_vjps(s);
  if (s.wants("learning")) check_outer_gradients(s);
  if (s.wants("projections")) check_projections(s);
  if (s.wants("fixedpoint")) check_fixedpoint(s);
  if (s.wants("sensitivity")) check_sensitivity(s);
  if (s.results.empty())
    throw std::invalid_argument("gradcheck: unknown scope '" + scope + "'");
  return s.results;
}

int print_check_table(const std::vector<CheckResult>& results) {
  int failures = 0;
  std::printf("%-12s %-42s %12s %10s  %s\n", "module", "check", "worst_err", "threshold",
              "status");
  for (const auto& r : results) {
    std::printf("%-12s %-42s %12.3e %10.0e  %s%s%s\n", r.module.c_str(), r.name.c_str(),
                r.worst_err, r.threshold, r.pass ? "pass" : "FAIL",
                r.note.empty() ? "" : "  # ", r.note.c_str());
    if (!r.pass) ++failures;
  }
  return failures;
}

}  // namespace amort
