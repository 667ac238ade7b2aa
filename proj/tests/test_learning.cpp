#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "amort/learning.hpp"
#include "amort/objectives.hpp"

using namespace amort;

namespace {

bool bitwise_equal(const Vec& a, const Vec& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// scalar loss as a function of theta for finite differencing
double loss_at(const AmortModel& model, const Vec& theta, const ProblemFamily& fam,
               const ContextVector& x, const LossSpec& loss) {
  ModelParams p{theta, model.param_layout()};
  IterateTrace trace;
  model.forward(p, fam, x, &trace);
  DomainPoint ystar;
  const DomainPoint* ystar_ptr = nullptr;
  if (loss.kind == LossKind::reg ||
      (loss.kind == LossKind::sum && loss.inner_kind == LossKind::reg)) {
    ystar = fam.oracle(x);
    ystar_ptr = &ystar;
  }
  return loss_value(loss, fam, x, trace, ystar_ptr);
}

double outer_grad_fd_error(const AmortModel& model, const ModelParams& params,
                           const ProblemFamily& fam, const ContextVector& x,
                           const LossSpec& loss, const GradModeSpec& mode, double h) {
  const Vec g = outer_gradient(model, params, fam, x, loss, mode);
  const Vec fd = finite_diff_grad(
      [&](const Vec& th) { return loss_at(model, th, fam, x, loss); }, params.theta, h);
  return rel_error(g, fd);
}

}  // namespace

TEST_CASE("point losses: regression and objective") {
  CHECK(loss_reg({1.0, 2.0}, {1.0, 2.0}) == 0.0);
  CHECK(loss_reg({0.0, 0.0}, {1.0, 1.0}) == 2.0);
  CHECK_THROWS(loss_reg({1.0}, {1.0, 2.0}));

  Rng rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const Vec a = rng.normal_vec(4), b = rng.normal_vec(4);
    CHECK(loss_reg(a, b) == doctest::Approx(norm2sq(sub(a, b))).epsilon(1e-12));
  }

  const ProblemFamily quad = make_quadratic_family(3, 0.2, 1.5);
  const ContextVector x = pack_quadratic_ctx(Matrix::identity(3), {1.0, 0.0, 0.0});
  // quadratic minimum value is -1/2 b'A^{-1}b
  CHECK(loss_obj(quad, quad.oracle(x), x) == doctest::Approx(-0.5).epsilon(1e-12));
  Rng rng2(2);
  for (int rep = 0; rep < 10; ++rep) {
    const ContextVector cx = quad.sample(rng2);
    const double fstar = loss_obj(quad, quad.oracle(cx), cx);
    CHECK(loss_obj(quad, rng2.normal_vec(3), cx) >= fstar - 1e-10);
  }
}

TEST_CASE("Remark 1: identity model with the objective loss is plain GD") {
  const ProblemFamily quad = make_quadratic_family(3, 0.2, 1.5);
  Rng rng(3);
  const ContextVector x = quad.sample(rng);
  const auto model = make_identity_model(3);
  ModelParams theta{rng.normal_vec(3), {{"y", {3}}}};
  const LossSpec obj{LossKind::obj, LossKind::obj, {}};
  const Vec g = outer_gradient(*model, theta, quad, x, obj, {GradMode::full_unroll});
  CHECK(bitwise_equal(g, quad.grad_y(theta.theta, x)));

  // 200 SGD steps on theta == 200 plain GD steps on f, bitwise
  const double lr = 0.1;
  Vec theta_sgd = theta.theta;
  Vec y_gd = theta.theta;
  OptState state;
  const OptimizerSpec sgd{OptimizerSpec::Kind::sgd, lr, 0.9, 0.999, 1e-8};
  for (int step = 0; step < 200; ++step) {
    ModelParams p{theta_sgd, theta.layout};
    const Vec grad = outer_gradient(*model, p, quad, x, obj, {GradMode::full_unroll});
    optimizer_step(sgd, state, theta_sgd, grad);
    const Vec gy = quad.grad_y(y_gd, x);
    for (int i = 0; i < 3; ++i) y_gd[i] -= lr * gy[i];
    CHECK(bitwise_equal(theta_sgd, y_gd));
  }
}

TEST_CASE("full unroll on quadratics matches the analytic chain") {
  const int n = 3, K = 4;
  const ProblemFamily quad = make_quadratic_family(n, 0.2, 1.5);
  Rng rng(5);
  const ContextVector x = quad.sample(rng);
  const Matrix a = quadratic_ctx_matrix(x, n);
  const double alpha = 0.3;
  const auto model = make_learned_init_gd_model({K, alpha}, n);
  ModelParams theta{rng.normal_vec(n), {{"y0", {n}}}};

  const LossSpec obj{LossKind::obj, LossKind::obj, {}};
  const Vec g = outer_gradient(*model, theta, quad, x, obj, {GradMode::full_unroll});

  // (I - alpha A)^K (A y^K - b)
  const auto [yk, trace] = learned_init_gd_forward({K, alpha}, theta, quad, x);
  Vec expect = quad.grad_y(yk, x);
  Matrix factor = Matrix::identity(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) factor(i, j) -= alpha * a(i, j);
  for (int k = 0; k < K; ++k) expect = matvec(factor, expect);
  CHECK(rel_error(g, expect) <= 1e-12);
}

TEST_CASE("outer gradients match finite differences across compatible combos") {
  Rng rng(7);
  const double kExact = 1e-5;   // smooth-only paths
  const double kKinked = 1e-4;  // paths crossing soft kinks

  // quadratic family, all models
  {
    const ProblemFamily fam = make_quadratic_family(4, 0.2, 1.5);
    std::vector<std::unique_ptr<AmortModel>> models;
    models.push_back(make_identity_model(4));
    MlpSpec mspec;
    mspec.input_dim = fam.ctx_dim;
    mspec.hidden_dims = {6};
    mspec.output_dim = 4;
    models.push_back(make_mlp_model(mspec));
    models.push_back(make_learned_init_gd_model({3, 0.3}, 4));
    models.push_back(make_learned_step_gd_model({3}, 4));

    for (const auto& model : models) {
      for (LossKind kind : {LossKind::reg, LossKind::obj}) {
        const LossSpec loss{kind, kind, {}};
        for (int rep = 0; rep < 5; ++rep) {
          const ContextVector x = fam.sample(rng);
          Rng irng(100 + rep);
          const ModelParams params = model->init_params(irng);
          CHECK(outer_grad_fd_error(*model, params, fam, x, loss, {GradMode::full_unroll},
                                    1e-6) <= kExact);
        }
      }
      // iterate-weighted sum loss through the shared unrolled graph
      if (model->num_iterates() > 1) {
        Vec w(model->num_iterates(), 1.0);
        const LossSpec sum{LossKind::sum, LossKind::obj, w};
        const ContextVector x = fam.sample(rng);
        Rng irng(200);
        const ModelParams params = model->init_params(irng);
        CHECK(outer_grad_fd_error(*model, params, fam, x, sum, {GradMode::full_unroll},
                                  1e-6) <= kExact);
      }
    }
  }

  // sphere family: mlp + learned-init with the objective loss
  {
    const ProblemFamily fam = make_sphere_family({});
    MlpSpec mspec;
    mspec.input_dim = fam.ctx_dim;
    mspec.hidden_dims = {8};
    mspec.output_dim = 3;
    const auto mlp = make_mlp_model(mspec);
    const auto init_gd = make_learned_init_gd_model({3, 0.2}, 3);
    const LossSpec obj{LossKind::obj, LossKind::obj, {}};
    int checked = 0;
    while (checked < 5) {
      const ContextVector x = fam.sample(rng);
      Rng irng(300 + checked);
      const ModelParams mp = mlp->init_params(irng);
      if (norm2(mlp->forward(mp, fam, x, nullptr)) < 0.2) continue;
      CHECK(outer_grad_fd_error(*mlp, mp, fam, x, obj, {GradMode::full_unroll}, 1e-6) <=
            kKinked);
      ModelParams gp{{0.9, -0.3, 0.5}, {{"y0", {3}}}};
      CHECK(outer_grad_fd_error(*init_gd, gp, fam, x, obj, {GradMode::full_unroll}, 1e-6) <=
            kKinked);
      ++checked;
    }
  }

  // sparse coding with LISTA under both losses, away from kinks
  {
    const ProblemFamily fam = make_sparse_coding_family(6, 12, 0.1, 9);
    const auto lista = make_lista_model(3, sparse_coding_config(fam));
    Rng irng(400);
    const ModelParams params = lista->init_params(irng);
    for (LossKind kind : {LossKind::reg, LossKind::obj}) {
      const LossSpec loss{kind, kind, {}};
      int checked = 0;
      while (checked < 5) {
        const ContextVector x = fam.sample(rng);
        const Vec out = lista->forward(params, fam, x, nullptr);
        bool near_zero = false;
        for (double v : out)
          if (v != 0.0 && std::abs(v) < 1e-3) near_zero = true;
        if (near_zero) continue;
        CHECK(outer_grad_fd_error(*lista, params, fam, x, loss, {GradMode::full_unroll},
                                  1e-7) <= kKinked);
        ++checked;
      }
    }
  }

  // maxq family with a linear policy
  {
    const ProblemFamily fam = make_maxq_family(5, 3, 11);
    MlpSpec lin;
    lin.input_dim = 5;
    lin.output_dim = 3;
    const auto model = make_mlp_model(lin);
    const LossSpec obj{LossKind::obj, LossKind::obj, {}};
    for (int rep = 0; rep < 5; ++rep) {
      const ContextVector x = fam.sample(rng);
      Rng irng(500 + rep);
      const ModelParams params = model->init_params(irng);
      CHECK(outer_grad_fd_error(*model, params, fam, x, obj, {GradMode::full_unroll}, 1e-6) <=
            kExact);
    }
  }
}

TEST_CASE("tbptt: exact at H=K, one factor at H=1, monotone bias") {
  const int n = 3, K = 3;
  const ProblemFamily quad = make_quadratic_family(n, 0.2, 1.5);
  Rng rng(13);
  const ContextVector x = quad.sample(rng);
  const double alpha = 0.3;
  const auto model = make_learned_init_gd_model({K, alpha}, n);
  ModelParams theta{rng.normal_vec(n), {{"y0", {n}}}};
  const LossSpec obj{LossKind::obj, LossKind::obj, {}};

  const Vec full = outer_gradient(*model, theta, quad, x, obj, {GradMode::full_unroll});
  GradModeSpec tb;
  tb.mode = GradMode::tbptt;
  tb.H = K;
  CHECK(bitwise_equal(tbptt_gradient(*model, theta, quad, x, obj, K), full));
  CHECK(bitwise_equal(outer_gradient(*model, theta, quad, x, obj, tb), full));

  // H = 1: a single (I - alpha A) factor on the final cotangent
  const Matrix a = quadratic_ctx_matrix(x, n);
  const auto [yk, trace] = learned_init_gd_forward({K, alpha}, theta, quad, x);
  Vec one_factor = quad.grad_y(yk, x);
  Matrix factor = Matrix::identity(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) factor(i, j) -= alpha * a(i, j);
  one_factor = matvec(factor, one_factor);
  CHECK(rel_error(tbptt_gradient(*model, theta, quad, x, obj, 1), one_factor) <= 1e-12);

  // bias shrinks monotonically as H grows
  double prev_bias = -1.0;
  for (int H = 1; H <= K; ++H) {
    const Vec g = tbptt_gradient(*model, theta, quad, x, obj, H);
    const double bias = norm2(sub(g, full));
    if (prev_bias >= 0.0) CHECK(bias <= prev_bias + 1e-15);
    prev_bias = bias;
  }

  CHECK_THROWS(tbptt_gradient(*model, theta, quad, x, obj, 0));
  CHECK_THROWS(tbptt_gradient(*model, theta, quad, x, obj, K + 1));
  const auto lista_fam = make_sparse_coding_family(4, 8, 0.1, 14);
  const auto lista = make_lista_model(2, sparse_coding_config(lista_fam));
  Rng irng(600);
  const ModelParams lp = lista->init_params(irng);
  CHECK_THROWS(tbptt_gradient(*lista, lp, lista_fam, x, obj, 1));
}

TEST_CASE("imaml inner solve: closed form, proximal limit, stationarity") {
  const int n = 4;
  const ProblemFamily quad = make_quadratic_family(n, 0.2, 1.5);
  Rng rng(15);
  const ContextVector x = quad.sample(rng);
  const Matrix a = quadratic_ctx_matrix(x, n);
  const Vec b = quadratic_ctx_rhs(x, n);
  const Vec theta0 = rng.normal_vec(n);

  const double lambda = 0.7;
  const InnerSolveResult inner = imaml_inner_solve(quad, x, theta0, lambda, 1e-10, 200000);
  CHECK(inner.converged);
  CHECK(inner.stationarity <= 1e-10);
  // (A + lambda I)^{-1} (b + lambda theta0)
  Matrix shifted = a;
  for (int i = 0; i < n; ++i) shifted(i, i) += lambda;
  Vec rhs = b;
  axpy(lambda, theta0, rhs);
  CHECK(max_abs_diff(inner.y, cholesky_solve(shifted, rhs)) <= 1e-8);

  // lambda -> infinity pins the solution at theta0
  const InnerSolveResult pinned = imaml_inner_solve(quad, x, theta0, 1e6, 1e-8, 200000);
  CHECK(norm2(sub(pinned.y, theta0)) <= 1e-4);
}

TEST_CASE("imaml gradient: closed form, unrolling oracle, identity limit") {
  const int n = 4;
  const ProblemFamily quad = make_quadratic_family(n, 0.2, 1.5);
  Rng rng(17);

  for (double lambda : {0.1, 1.0, 10.0}) {
    for (int rep = 0; rep < 3; ++rep) {
      const ContextVector x = quad.sample(rng);
      const Matrix a = quadratic_ctx_matrix(x, n);
      const Vec theta0 = rng.normal_vec(n);
      const Vec cot = rng.normal_vec(n);

      const Vec g = imaml_gradient(quad, x, theta0, lambda, cot);
      Matrix shifted = a;
      for (int i = 0; i < n; ++i) shifted(i, i) += lambda;
      const Vec expect = scaled(cholesky_solve(shifted, cot), lambda);
      CHECK(max_abs_diff(g, expect) <= 1e-8);

      // 5000-step unrolled gradient of the proximal inner problem
      ProblemFamily prox = quad;
      prox.eval = [&quad, lambda, theta0](const DomainPoint& y, const ContextVector& cx) {
        return quad.eval(y, cx) + 0.5 * lambda * norm2sq(sub(y, theta0));
      };
      prox.grad_y = [&quad, lambda, theta0](const DomainPoint& y, const ContextVector& cx) {
        Vec gy = quad.grad_y(y, cx);
        for (std::size_t i = 0; i < gy.size(); ++i) gy[i] += lambda * (y[i] - theta0[i]);
        return gy;
      };
      prox.hvp_y = [&quad, lambda](const DomainPoint& y, const ContextVector& cx, const Vec& v) {
        Vec hv = quad.hvp_y(y, cx, v);
        axpy(lambda, v, hv);
        return hv;
      };
      // unroll y_{t+1} = y_t - eta (grad f + lambda (y - theta0)) and
      // accumulate the product of (I - eta H) factors applied to cot;
      // theta0 enters every step through +eta*lambda*I
      const double eta = 0.8 / (2.0 + lambda);
      Vec y = theta0;
      Matrix jac = Matrix::identity(n);  // D_theta0 y_t
      for (int t = 0; t < 5000; ++t) {
        const Vec gy = prox.grad_y(y, x);
        // jac <- (I - eta (A + lambda I)) jac + eta lambda I
        Matrix next(n, n);
        for (int j = 0; j < n; ++j) {
          Vec col(n);
          for (int i = 0; i < n; ++i) col[i] = jac(i, j);
          const Vec hcol = prox.hvp_y(y, x, col);
          for (int i = 0; i < n; ++i) next(i, j) = col[i] - eta * hcol[i];
          next(j, j) += eta * lambda;
        }
        jac = std::move(next);
        axpy(-eta, gy, y);
      }
      const Vec unrolled = matvec_t(jac, cot);
      CHECK(rel_error(g, unrolled) <= 1e-4);
    }
  }

  // very large lambda pulls the cotangent back unchanged
  const ContextVector x = quad.sample(rng);
  const Vec theta0 = rng.normal_vec(n);
  const Vec cot = rng.normal_vec(n);
  const Vec g = imaml_gradient(quad, x, theta0, 1e6, cot, 1e-8);
  CHECK(rel_error(g, cot) <= 1e-5);
}

TEST_CASE("es gradient: quadratic smoothing identity and constant loss") {
  const int n = 6;
  // L(theta) = 1/2 |theta|^2 smoothed keeps gradient theta
  ProblemFamily fam = make_quadratic_family(n, 1.0, 1.0);
  const ContextVector x = pack_quadratic_ctx(Matrix::identity(n), Vec(n, 0.0));
  const auto model = make_identity_model(n);
  Rng rng(19);
  ModelParams theta{rng.normal_vec(n), {{"y", {n}}}};
  const LossSpec obj{LossKind::obj, LossKind::obj, {}};

  Rng es_rng(23);
  const Vec g = es_gradient(*model, theta, fam, {x}, obj, 0.3, 10000, es_rng);
  CHECK(rel_error(g, theta.theta) <= 0.05);

  // constant loss: zero-mean estimate
  ProblemFamily flat = fam;
  flat.eval = [](const DomainPoint&, const ContextVector&) { return 5.0; };
  Rng es_rng2(29);
  const Vec gz = es_gradient(*model, theta, flat, {x}, obj, 0.3, 10000, es_rng2);
  CHECK(norm2(gz) <= 0.05);

  CHECK_THROWS(es_gradient(*model, theta, fam, {x}, obj, 0.3, 7, es_rng));
  CHECK_THROWS(es_gradient(*model, theta, fam, {x}, obj, 0.0, 8, es_rng));
}

TEST_CASE("es estimator is unbiased within three standard errors") {
  const int n = 4;
  const ProblemFamily fam = make_quadratic_family(n, 1.0, 1.0);
  const ContextVector x = pack_quadratic_ctx(Matrix::identity(n), Vec(n, 0.0));
  const auto model = make_identity_model(n);
  Rng rng(31);
  ModelParams theta{rng.normal_vec(n), {{"y", {n}}}};
  const LossSpec obj{LossKind::obj, LossKind::obj, {}};

  // repeated small populations; mean against the smoothed-gradient truth
  const int trials = 400, pop = 16;
  Vec mean(n, 0.0);
  std::vector<Vec> draws;
  Rng es_rng(37);
  for (int trial = 0; trial < trials; ++trial) {
    const Vec g = es_gradient(*model, theta, fam, {x}, obj, 0.25, pop, es_rng);
    axpy(1.0 / trials, g, mean);
    draws.push_back(g);
  }
  for (int i = 0; i < n; ++i) {
    double var = 0.0;
    for (const Vec& d : draws) var += (d[i] - mean[i]) * (d[i] - mean[i]);
    var /= (trials - 1.0);
    const double se = std::sqrt(var / trials);
    CHECK(std::abs(mean[i] - theta.theta[i]) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("optimizer steps: sgd, adam bound, zero gradient") {
  Vec p{1.0};
  OptState st;
  optimizer_step({OptimizerSpec::Kind::sgd, 0.1, 0.9, 0.999, 1e-8}, st, p, {1.0});
  CHECK(p[0] == doctest::Approx(0.9));

  Vec q{0.5, -0.5};
  OptState st2;
  const OptimizerSpec adam{OptimizerSpec::Kind::adam, 0.01, 0.9, 0.999, 1e-8};
  optimizer_step(adam, st2, q, {3.0, -7.0});
  CHECK(std::abs(q[0] - 0.5) <= adam.lr * 1.0001);
  CHECK(std::abs(q[1] + 0.5) <= adam.lr * 1.0001);

  Vec r{1.0};
  OptState st3;
  optimizer_step(adam, st3, r, {0.0});
  CHECK(r[0] == 1.0);
  CHECK(st3.t == 1);

  Vec s{1.0};
  OptState st4;
  CHECK_THROWS(optimizer_step(adam, st4, s, {std::nan("")}));
}

TEST_CASE("train: lr=0 freezes parameters, steps=0 returns the init") {
  const ProblemFamily quad = make_quadratic_family(3, 0.2, 1.5);
  MlpSpec mspec;
  mspec.input_dim = quad.ctx_dim;
  mspec.hidden_dims = {4};
  mspec.output_dim = 3;
  const auto model = make_mlp_model(mspec);

  TrainOptions opt;
  opt.n_train = 1;  // single fixed context keeps the batch identical per step
  opt.n_val = 4;
  opt.batch = 1;
  opt.steps = 5;
  opt.seed = 7;
  const LossSpec obj{LossKind::obj, LossKind::obj, {}};
  const OptimizerSpec frozen{OptimizerSpec::Kind::sgd, 0.0, 0.9, 0.999, 1e-8};
  const TrainResult res = train(*model, quad, obj, {GradMode::full_unroll}, frozen, opt);
  // loss history must be flat when nothing moves
  for (const auto& row : res.history)
    CHECK(row.train_loss == res.history.front().train_loss);
  const TrainOptions opt_b = opt;
  const TrainResult res_again =
      train(*model, quad, obj, {GradMode::full_unroll}, frozen, opt_b);
  CHECK(bitwise_equal(res.params.theta, res_again.params.theta));

  TrainOptions zero = opt;
  zero.steps = 0;
  const TrainResult res0 =
      train(*model, quad, obj, {GradMode::full_unroll},
            {OptimizerSpec::Kind::adam, 1e-3, 0.9, 0.999, 1e-8}, zero);
  const TrainResult res0b =
      train(*model, quad, obj, {GradMode::full_unroll},
            {OptimizerSpec::Kind::adam, 1e-3, 0.9, 0.999, 1e-8}, zero);
  CHECK(bitwise_equal(res0.params.theta, res0b.params.theta));
  CHECK(res0.history.empty());
}

TEST_CASE("train is deterministic given the seed") {
  const ProblemFamily quad = make_quadratic_family(3, 0.2, 1.5);
  const auto model = make_learned_init_gd_model({3, 0.3}, 3);
  TrainOptions opt;
  opt.n_train = 16;
  opt.n_val = 8;
  opt.batch = 4;
  opt.steps = 20;
  opt.seed = 11;
  const LossSpec obj{LossKind::obj, LossKind::obj, {}};
  const OptimizerSpec adam{OptimizerSpec::Kind::adam, 1e-2, 0.9, 0.999, 1e-8};
  const TrainResult a = train(*model, quad, obj, {GradMode::full_unroll}, adam, opt);
  const TrainResult b = train(*model, quad, obj, {GradMode::full_unroll}, adam, opt);
  CHECK(bitwise_equal(a.params.theta, b.params.theta));
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].grad_norm == b.history[i].grad_norm);
    CHECK(a.history[i].val_mean_gap == b.history[i].val_mean_gap);
  }
}
