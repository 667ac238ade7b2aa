#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "amort/models.hpp"
#include "amort/objectives.hpp"

using namespace amort;

namespace {

bool bitwise_equal(const Vec& a, const Vec& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// finite-difference check of a parameter VJP through a fixed cotangent:
// s(theta) = cot . forward(theta) must have ds/dtheta = vjp(cot)
double vjp_fd_error(const AmortModel& model, const ModelParams& params,
                    const ProblemFamily& fam, const ContextVector& x, Rng& rng, double h) {
  IterateTrace trace;
  const Vec out = model.forward(params, fam, x, &trace);
  const Vec cot = rng.normal_vec(static_cast<int>(out.size()));
  std::vector<Vec> cots(trace.iterates.size());
  cots.back() = cot;
  const Vec vjp = model.vjp_params(params, fam, x, cots, 0);

  auto scalar = [&](const Vec& theta) {
    ModelParams p = params;
    p.theta = theta;
    return dot(cot, model.forward(p, fam, x, nullptr));
  };
  const Vec fd = finite_diff_grad(scalar, params.theta, h);
  return rel_error(vjp, fd);
}

ProblemFamily zero_gradient_family(int n) {
  ProblemFamily fam;
  fam.name = "flat";
  fam.n = n;
  fam.ctx_dim = 1;
  fam.eval = [](const DomainPoint&, const ContextVector&) { return 0.0; };
  fam.grad_y = [n](const DomainPoint&, const ContextVector&) { return Vec(n, 0.0); };
  fam.hvp_y = [n](const DomainPoint&, const ContextVector&, const Vec&) { return Vec(n, 0.0); };
  fam.sample = [](Rng&) {
    ContextVector x;
    x.data = {0.0};
    return x;
  };
  return fam;
}

}  // namespace

TEST_CASE("mlp: zero params and identity block") {
  MlpSpec spec;
  spec.input_dim = 3;
  spec.hidden_dims = {4};
  spec.output_dim = 2;
  ModelParams zero{Vec(layout_size(mlp_param_layout(spec)), 0.0), mlp_param_layout(spec)};
  const Vec out = mlp_forward(spec, zero, {0.3, -0.2, 1.0});
  CHECK(norm2(out) == 0.0);

  MlpSpec lin;
  lin.input_dim = 3;
  lin.output_dim = 3;
  ModelParams ident{Vec(12, 0.0), mlp_param_layout(lin)};
  ident.theta[0] = ident.theta[4] = ident.theta[8] = 1.0;  // W = I, b = 0
  const Vec x{0.7, -1.1, 2.0};
  CHECK(bitwise_equal(mlp_forward(lin, ident, x), x));
}

TEST_CASE("mlp vjp: analytic single layer and finite differences") {
  // y = Wx: d(cot . y)/dW = cot (x) x
  MlpSpec lin;
  lin.input_dim = 2;
  lin.output_dim = 2;
  ModelParams p{{1.0, 2.0, -0.5, 0.3, 0.0, 0.0}, mlp_param_layout(lin)};
  const Vec x{0.4, -1.2};
  const Vec cot{1.0, -2.0};
  const Vec g = mlp_vjp_params(lin, p, x, cot);
  CHECK(g[0] == doctest::Approx(cot[0] * x[0]));
  CHECK(g[1] == doctest::Approx(cot[0] * x[1]));
  CHECK(g[2] == doctest::Approx(cot[1] * x[0]));
  CHECK(g[3] == doctest::Approx(cot[1] * x[1]));
  CHECK(g[4] == doctest::Approx(cot[0]));
  CHECK(g[5] == doctest::Approx(cot[1]));

  CHECK(norm2(mlp_vjp_params(lin, p, x, {0.0, 0.0})) == 0.0);

  for (Activation act : {Activation::tanh_act, Activation::relu_act, Activation::softplus_act}) {
    MlpSpec spec;
    spec.input_dim = 4;
    spec.hidden_dims = {8, 6};
    spec.output_dim = 3;
    spec.activation = act;
    Rng rng(31);
    const auto model = make_mlp_model(spec);
    const ModelParams params = mlp_init_params(spec, rng);
    const ProblemFamily dummy = zero_gradient_family(3);
    ContextVector x4;
    x4.data = rng.normal_vec(4);
    CHECK(vjp_fd_error(*model, params, dummy, x4, rng, 1e-6) <= 1e-5);
  }
}

TEST_CASE("learned-init GD: fixed points and analytic steps") {
  const ProblemFamily quad = make_quadratic_family(2, 0.1, 2.0);
  const ContextVector x = pack_quadratic_ctx(Matrix::identity(2), {0.0, 0.0});

  // stationary start stays put
  LearnedInitGdSpec spec{5, 0.5};
  ModelParams at_min{{0.0, 0.0}, {{"y0", {2}}}};
  const auto [y_fix, trace_fix] = learned_init_gd_forward(spec, at_min, quad, x);
  CHECK(norm2(y_fix) == 0.0);

  // A = I, b = 0, alpha = 0.5, theta = (1, 0), K = 1 -> (0.5, 0)
  LearnedInitGdSpec one{1, 0.5};
  ModelParams start{{1.0, 0.0}, {{"y0", {2}}}};
  const auto [y1, trace1] = learned_init_gd_forward(one, start, quad, x);
  CHECK(y1[0] == 0.5);
  CHECK(y1[1] == 0.0);
  CHECK(bitwise_equal(trace1.iterates.back(), y1));

  // contraction bound towards the oracle over K = 50 steps
  const ProblemFamily quad5 = make_quadratic_family(5, 0.2, 1.5);
  Rng rng(33);
  const ContextVector ctx = quad5.sample(rng);
  const Vec oracle = quad5.oracle(ctx);
  const Matrix a = quadratic_ctx_matrix(ctx, 5);
  const Eigh eig = jacobi_eigh(a);
  const double alpha = 0.8;
  double rate = 0.0;
  for (double lam : eig.values) rate = std::max(rate, std::abs(1.0 - alpha * lam));
  LearnedInitGdSpec fifty{50, alpha};
  ModelParams theta{rng.normal_vec(5), {{"y0", {5}}}};
  const auto [y50, trace50] = learned_init_gd_forward(fifty, theta, quad5, ctx);
  const double start_dist = norm2(sub(theta.theta, oracle));
  CHECK(norm2(sub(y50, oracle)) <= std::pow(rate, 50) * start_dist + 1e-12);
}

TEST_CASE("learned-init GD jacobian: quadratic closed forms and sphere FD") {
  const int n = 4;
  const ProblemFamily quad = make_quadratic_family(n, 0.2, 1.5);
  Rng rng(35);
  const ContextVector x = quad.sample(rng);
  const Matrix a = quadratic_ctx_matrix(x, n);
  const double alpha = 0.3;
  ModelParams theta{rng.normal_vec(n), {{"y0", {n}}}};

  for (int K : {1, 3, 10}) {
    const Matrix jac = learned_init_gd_jacobian({K, alpha}, theta, quad, x);
    Matrix expect = Matrix::identity(n);
    Matrix factor = Matrix::identity(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) factor(i, j) -= alpha * a(i, j);
    for (int k = 0; k < K; ++k) expect = matmul(factor, expect);
    CHECK(frobenius_distance(jac, expect) <= 1e-10);
  }

  // first-order mode returns the identity
  const Matrix fo = learned_init_gd_jacobian_fo({3, alpha}, quad);
  CHECK(frobenius_distance(fo, Matrix::identity(n)) == 0.0);

  // sphere-family jacobian against finite differences of the forward map
  const ProblemFamily sphere = make_sphere_family({});
  const ContextVector sx = sphere.sample(rng);
  LearnedInitGdSpec sspec{3, 0.2};
  ModelParams sp{{0.8, -0.4, 0.6}, {{"y0", {3}}}};
  const Matrix sjac = learned_init_gd_jacobian(sspec, sp, sphere, sx);
  for (int j = 0; j < 3; ++j) {
    Vec dir(3, 0.0);
    dir[j] = 1.0;
    const Vec fd = finite_diff_jvp(
        [&](const Vec& th) {
          ModelParams p = sp;
          p.theta = th;
          return learned_init_gd_forward(sspec, p, sphere, sx).first;
        },
        sp.theta, dir, 1e-6);
    Vec col(3);
    for (int i = 0; i < 3; ++i) col[i] = sjac(i, j);
    CHECK(rel_error(col, fd) <= 1e-4);
  }
}

TEST_CASE("learned-step GD: reduction to plain GD and flat-field identity") {
  const int n = 3, K = 4;
  const ProblemFamily quad = make_quadratic_family(n, 0.2, 1.5);
  Rng rng(37);
  const ContextVector x = quad.sample(rng);

  // s = log(alpha) elementwise, m = 0: bitwise identical to learned-init GD
  // when alpha is reconstructed by the same exp(log) round trip
  const double s_val = std::log(0.37);
  const double alpha = std::exp(s_val);
  const Vec y0 = rng.normal_vec(n);
  ModelParams step_params{Vec(n + 2 * K * n, 0.0), {{"y0", {n}}, {"log_step", {K, n}}, {"momentum_gate", {K, n}}}};
  for (int i = 0; i < n; ++i) step_params.theta[i] = y0[i];
  for (int i = 0; i < K * n; ++i) step_params.theta[n + i] = s_val;

  const auto [y_step, trace_step] = learned_step_gd_forward({K}, step_params, quad, x);
  ModelParams init_params{y0, {{"y0", {n}}}};
  const auto [y_init, trace_init] = learned_init_gd_forward({K, alpha}, init_params, quad, x);
  CHECK(bitwise_equal(y_step, y_init));
  for (int t = 0; t <= K; ++t)
    CHECK(bitwise_equal(trace_step.iterates[t], trace_init.iterates[t]));

  // zero gradient field leaves the start untouched
  const ProblemFamily flat = zero_gradient_family(n);
  ContextVector fx;
  fx.data = {0.0};
  const auto [y_flat, trace_flat] = learned_step_gd_forward({K}, step_params, flat, fx);
  CHECK(bitwise_equal(y_flat, y0));
}

TEST_CASE("learned-step GD vjp matches finite differences") {
  const ProblemFamily quad = make_quadratic_family(3, 0.2, 1.5);
  Rng rng(39);
  const ContextVector x = quad.sample(rng);
  const auto model = make_learned_step_gd_model({3}, 3);
  Rng init_rng(40);
  const ModelParams params = model->init_params(init_rng);
  CHECK(vjp_fd_error(*model, params, quad, x, rng, 1e-6) <= 1e-4);
}

TEST_CASE("lista: zero input, ISTA-weight equivalence, vjp") {
  const ProblemFamily fam = make_sparse_coding_family(6, 12, 0.1, 41);
  const SparseCodingFamilyConfig& cfg = sparse_coding_config(fam);
  const int K = 4;
  const auto model = make_lista_model(K, cfg);
  Rng rng(42);
  const ModelParams ista_weights = model->init_params(rng);

  ContextVector zero;
  zero.data.assign(6, 0.0);
  zero.family_tag = "sparse_coding";
  const auto [y0, tr0] = lista_forward({K, 6, 12}, ista_weights, zero);
  CHECK(norm2(y0) == 0.0);

  // at (W_e, S, alpha/L) LISTA reproduces K ISTA steps bitwise
  const ContextVector x = fam.sample(rng);
  const auto [y_lista, tr_lista] = lista_forward({K, 6, 12}, ista_weights, x);
  Vec y_ista(12, 0.0);
  for (int t = 0; t < K; ++t) {
    y_ista = ista_step(y_ista, x, cfg);
    CHECK(bitwise_equal(tr_lista.iterates[t + 1], y_ista));
  }
  CHECK(bitwise_equal(y_lista, y_ista));

  // vjp against finite differences, away from threshold kinks
  int checked = 0;
  while (checked < 5) {
    const ContextVector cx = fam.sample(rng);
    // reject draws where any pre-activation sits within 1e-3 of the kink
    bool near_kink = false;
    Vec y(12, 0.0);
    for (int t = 0; t < K; ++t) {
      Vec pre = matvec(cfg.W_e, cx.data);
      const Vec gy = matvec(cfg.S, y);
      for (int i = 0; i < 12; ++i) {
        pre[i] += gy[i];
        if (std::abs(std::abs(pre[i]) - cfg.beta) < 1e-3) near_kink = true;
      }
      y = soft_threshold(pre, cfg.beta);
    }
    if (near_kink) continue;
    CHECK(vjp_fd_error(*model, ista_weights, fam, cx, rng, 1e-7) <= 1e-5);
    ++checked;
  }
}

TEST_CASE("trace final iterate equals the returned output bitwise") {
  const ProblemFamily quad = make_quadratic_family(3, 0.2, 1.5);
  Rng rng(43);
  const ContextVector x = quad.sample(rng);
  std::vector<std::unique_ptr<AmortModel>> models;
  models.push_back(make_identity_model(3));
  MlpSpec mspec;
  mspec.input_dim = quad.ctx_dim;
  mspec.hidden_dims = {8};
  mspec.output_dim = 3;
  models.push_back(make_mlp_model(mspec));
  models.push_back(make_learned_init_gd_model({4, 0.3}, 3));
  models.push_back(make_learned_step_gd_model({4}, 3));
  for (const auto& model : models) {
    Rng irng(44);
    const ModelParams p = model->init_params(irng);
    IterateTrace trace;
    const Vec out = model->forward(p, quad, x, &trace);
    CHECK(bitwise_equal(trace.iterates.back(), out));
    CHECK(static_cast<int>(trace.iterates.size()) == model->num_iterates());
  }
}

TEST_CASE("oracle model predicts the family oracle and rejects vjp") {
  const ProblemFamily quad = make_quadratic_family(3, 0.2, 1.5);
  Rng rng(45);
  const ContextVector x = quad.sample(rng);
  const auto model = make_oracle_model();
  const ModelParams empty = model->init_params(rng);
  CHECK(bitwise_equal(model->forward(empty, quad, x, nullptr), quad.oracle(x)));
  CHECK_FALSE(model->supports_vjp());
  CHECK_THROWS(model->vjp_params(empty, quad, x, {}, 0));
}
