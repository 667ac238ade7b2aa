#include "amort/learning.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "amort/parallel.hpp"

namespace amort {

double loss_reg(const DomainPoint& predict_out, const DomainPoint& ystar) {
  if (predict_out.size() != ystar.size())
    throw std::invalid_argument("loss_reg: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < ystar.size(); ++i) {
    const double d = predict_out[i] - ystar[i];
    s += d * d;
  }
  return s;
}

double loss_obj(const ProblemFamily& family, const DomainPoint& out, const ContextVector& x) {
  return family.eval(out, x);
}

namespace {

double iterate_loss(LossKind kind, const ProblemFamily& family, const ContextVector& x,
                    const DomainPoint& y, const DomainPoint* ystar) {
  switch (kind) {
    case LossKind::reg:
      if (!ystar) throw std::invalid_argument("regression loss needs a ground-truth solution");
      return loss_reg(y, *ystar);
    case LossKind::obj: return loss_obj(family, y, x);
    case LossKind::sum: break;
  }
  throw std::logic_error("iterate_loss: sum is not an iterate loss");
}

Vec iterate_cotangent(LossKind kind, const ProblemFamily& family, const ContextVector& x,
                      const DomainPoint& y, const DomainPoint* ystar) {
  if (kind == LossKind::reg) {
    Vec c(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) c[i] = 2.0 * (y[i] - (*ystar)[i]);
    return c;
  }
  return family.grad_y(y, x);
}

void validate_loss(const LossSpec& loss, int num_iterates) {
  if (loss.kind != LossKind::sum) return;
  if (static_cast<int>(loss.weights.size()) != num_iterates)
    throw std::invalid_argument("sum loss: weights length must be K+1");
  bool any = false;
  for (double w : loss.weights) {
    if (w < 0.0) throw std::invalid_argument("sum loss: weights must be >= 0");
    if (w > 0.0) any = true;
  }
  if (!any) throw std::invalid_argument("sum loss: at least one weight must be > 0");
}

bool loss_needs_oracle(const LossSpec& loss) {
  return loss.kind == LossKind::reg ||
         (loss.kind == LossKind::sum && loss.inner_kind == LossKind::reg);
}

DomainPoint oracle_or_throw(const ProblemFamily& family, const ContextVector& x) {
  if (!family.has_oracle())
    throw std::runtime_error("regression loss: family '" + family.name + "' has no oracle");
  return family.oracle(x);
}

}  // namespace

double loss_value(const LossSpec& loss, const ProblemFamily& family, const ContextVector& x,
                  const IterateTrace& trace, const DomainPoint* ystar) {
  validate_loss(loss, static_cast<int>(trace.iterates.size()));
  if (loss.kind != LossKind::sum)
    return iterate_loss(loss.kind, family, x, trace.iterates.back(), ystar);
  double total = 0.0;
  for (std::size_t i = 0; i < trace.iterates.size(); ++i)
    if (loss.weights[i] > 0.0)
      total += loss.weights[i] * iterate_loss(loss.inner_kind, family, x, trace.iterates[i], ystar);
  return total;
}

namespace {

// Weighted per-iterate cotangents for a trace; empty Vec marks zero.
std::vector<Vec> build_cotangents(const LossSpec& loss, const ProblemFamily& family,
                                  const ContextVector& x, const IterateTrace& trace,
                                  const DomainPoint* ystar) {
  const int count = static_cast<int>(trace.iterates.size());
  std::vector<Vec> cots(count);
  if (loss.kind != LossKind::sum) {
    cots[count - 1] = iterate_cotangent(loss.kind, family, x, trace.iterates.back(), ystar);
    return cots;
  }
  for (int i = 0; i < count; ++i) {
    if (loss.weights[i] == 0.0) continue;
    cots[i] = iterate_cotangent(loss.inner_kind, family, x, trace.iterates[i], ystar);
    for (double& v : cots[i]) v *= loss.weights[i];
  }
  return cots;
}

Vec unrolled_gradient(const AmortModel& model, const ModelParams& params,
                      const ProblemFamily& family, const ContextVector& x, const LossSpec& loss,
                      int truncation_start) {
  IterateTrace trace;
  model.forward(params, family, x, &trace);
  validate_loss(loss, static_cast<int>(trace.iterates.size()));
  DomainPoint ystar;
  const DomainPoint* ystar_ptr = nullptr;
  if (loss_needs_oracle(loss)) {
    ystar = oracle_or_throw(family, x);
    ystar_ptr = &ystar;
  }
  const std::vector<Vec> cots = build_cotangents(loss, family, x, trace, ystar_ptr);
  return model.vjp_params(params, family, x, cots, truncation_start);
}

}  // namespace

Vec tbptt_gradient(const AmortModel& model, const ModelParams& params,
                   const ProblemFamily& family, const ContextVector& x, const LossSpec& loss,
                   int H) {
  const int K = model.num_iterates() - 1;
  if (H < 1 || H > K) throw std::invalid_argument("tbptt_gradient: need 1 <= H <= K");
  if (!model.supports_truncation())
    throw std::invalid_argument(std::string("tbptt is not defined for model kind '") +
                                model.kind() + "'");
  return unrolled_gradient(model, params, family, x, loss, K - H);
}

InnerSolveResult imaml_inner_solve(const ProblemFamily& family, const ContextVector& x,
                                   const Vec& theta0, double lambda, double tol, int max_iters) {
  if (!(lambda > 0.0)) throw std::invalid_argument("imaml_inner_solve: lambda must be > 0");
  const double l_est = power_iteration_lmax(
      [&](const Vec& v) { return family.hvp_y(theta0, x, v); }, family.n, 20);
  const double step = 1.0 / (lambda + l_est);
  // lambda (y - theta0) carries cancellation noise of order lambda*eps*|theta0|
  const double noise_floor =
      32.0 * 2.220446049250313e-16 * lambda * (1.0 + norm2(theta0));
  const double tol_eff = std::max(tol, noise_floor);

  InnerSolveResult res;
  res.y = theta0;
  for (int it = 0; it < max_iters; ++it) {
    Vec g = family.grad_y(res.y, x);
    for (int i = 0; i < family.n; ++i) g[i] += lambda * (res.y[i] - theta0[i]);
    res.stationarity = norm2(g);
    if (res.stationarity <= tol_eff) {
      res.converged = true;
      break;
    }
    axpy(-step, g, res.y);
    res.iters = it + 1;
  }
  return res;
}

Vec imaml_gradient_at(const ProblemFamily& family, const ContextVector& x, const DomainPoint& yhat,
                      double lambda, const Vec& outer_cotangent) {
  auto op = [&](const Vec& v) {
    Vec hv = family.hvp_y(yhat, x, v);
    axpy(lambda, v, hv);
    return hv;
  };
  const CgResult cg = cg_solve(op, outer_cotangent, 1e-10, 10 * family.n + 100);
  if (!cg.converged && cg.residual > 1e-6)
    throw std::runtime_error("imaml_gradient: conjugate gradient failed (residual " +
                             std::to_string(cg.residual) + "); Hessian may be indefinite");
  return scaled(cg.x, lambda);
}

Vec imaml_gradient(const ProblemFamily& family, const ContextVector& x, const Vec& theta0,
                   double lambda, const Vec& outer_cotangent, double inner_tol,
                   int inner_max_iters) {
  const InnerSolveResult inner =
      imaml_inner_solve(family, x, theta0, lambda, inner_tol, inner_max_iters);
  if (!inner.converged)
    throw std::runtime_error("imaml_gradient: inner solve did not converge (stationarity " +
                             std::to_string(inner.stationarity) + ")");
  return imaml_gradient_at(family, x, inner.y, lambda, outer_cotangent);
}

Vec es_gradient(const AmortModel& model, const ModelParams& params, const ProblemFamily& family,
                const std::vector<ContextVector>& contexts, const LossSpec& loss, double sigma,
                int pop_size, Rng& rng) {
  if (!(sigma > 0.0)) throw std::invalid_argument("es_gradient: sigma must be > 0");
  if (pop_size < 2 || pop_size % 2 != 0)
    throw std::invalid_argument("es_gradient: pop_size must be even and >= 2");
  const int dim = static_cast<int>(params.theta.size());
  const int half = pop_size / 2;

  // oracles are shared across the population
  std::vector<DomainPoint> oracles;
  const bool needs_oracle = loss_needs_oracle(loss);
  if (needs_oracle) {
    oracles.resize(contexts.size());
    parallel_for(contexts.size(),
                 [&](std::size_t i) { oracles[i] = oracle_or_throw(family, contexts[i]); });
  }

  std::vector<Vec> eps(half);
  for (int j = 0; j < half; ++j) eps[j] = scaled(rng.normal_vec(dim), sigma);

  Vec losses(pop_size, 0.0);
  parallel_for(static_cast<std::size_t>(pop_size), [&](std::size_t j) {
    const int base = static_cast<int>(j) % half;
    const double sign = j < static_cast<std::size_t>(half) ? 1.0 : -1.0;
    ModelParams perturbed = params;
    axpy(sign, eps[base], perturbed.theta);
    double total = 0.0;
    for (std::size_t c = 0; c < contexts.size(); ++c) {
      IterateTrace trace;
      model.forward(perturbed, family, contexts[c], &trace);
      total += loss_value(loss, family, contexts[c], trace,
                          needs_oracle ? &oracles[c] : nullptr);
    }
    losses[j] = total / static_cast<double>(contexts.size());
  });

  double mean = 0.0;
  for (double l : losses) mean += l;
  mean /= static_cast<double>(pop_size);

  Vec grad(dim, 0.0);
  const double scale = 1.0 / (static_cast<double>(pop_size) * sigma * sigma);
  for (int j = 0; j < pop_size; ++j) {
    const int base = j % half;
    const double sign = j < half ? 1.0 : -1.0;
    axpy(scale * sign * (losses[j] - mean), eps[base], grad);
  }
  return grad;
}

Vec outer_gradient(const AmortModel& model, const ModelParams& params,
                   const ProblemFamily& family, const ContextVector& x, const LossSpec& loss,
                   const GradModeSpec& mode, Rng* es_rng) {
  switch (mode.mode) {
    case GradMode::full_unroll:
      if (!model.supports_vjp())
        throw std::invalid_argument(std::string("model kind '") + model.kind() +
                                    "' has no parameter derivative");
      return unrolled_gradient(model, params, family, x, loss, 0);

    case GradMode::tbptt:
      return tbptt_gradient(model, params, family, x, loss, mode.H);

    case GradMode::first_order: {
      // identity-approximate the model derivative; meaningful for models
      // whose parameters are the initial iterate
      if (std::string(model.kind()) != "learned_init" && std::string(model.kind()) != "identity")
        throw std::invalid_argument(std::string("first_order mode is incompatible with model '") +
                                    model.kind() + "'");
      IterateTrace trace;
      model.forward(params, family, x, &trace);
      validate_loss(loss, static_cast<int>(trace.iterates.size()));
      DomainPoint ystar;
      const DomainPoint* ystar_ptr = nullptr;
      if (loss_needs_oracle(loss)) {
        ystar = oracle_or_throw(family, x);
        ystar_ptr = &ystar;
      }
      const std::vector<Vec> cots = build_cotangents(loss, family, x, trace, ystar_ptr);
      Vec g(params.theta.size(), 0.0);
      for (const Vec& c : cots)
        if (!c.empty()) axpy(1.0, c, g);
      return g;
    }

    case GradMode::imaml: {
      if (std::string(model.kind()) != "learned_init" && std::string(model.kind()) != "identity")
        throw std::invalid_argument(std::string("imaml mode is incompatible with model '") +
                                    model.kind() + "'");
      if (loss.kind == LossKind::sum)
        throw std::invalid_argument("imaml mode differentiates only the final solution");
      const InnerSolveResult inner = imaml_inner_solve(family, x, params.theta, mode.lambda,
                                                       mode.imaml_tol, mode.imaml_max_iters);
      if (!inner.converged)
        throw std::runtime_error("imaml inner solve did not converge");
      DomainPoint ystar;
      const DomainPoint* ystar_ptr = nullptr;
      if (loss_needs_oracle(loss)) {
        ystar = oracle_or_throw(family, x);
        ystar_ptr = &ystar;
      }
      const Vec cot = iterate_cotangent(loss.kind, family, x, inner.y, ystar_ptr);
      return imaml_gradient_at(family, x, inner.y, mode.lambda, cot);
    }

    case GradMode::es: {
      if (!es_rng) throw std::invalid_argument("es mode needs an Rng");
      return es_gradient(model, params, family, {x}, loss, mode.sigma, mode.pop_size, *es_rng);
    }
  }
  throw std::logic_error("outer_gradient: unhandled mode");
}

void optimizer_step(const OptimizerSpec& opt, OptState& state, Vec& params, const Vec& grad) {
  if (params.size() != grad.size()) throw std::invalid_argument("optimizer_step: shape mismatch");
  for (double g : grad)
    if (!std::isfinite(g))
      throw std::runtime_error("optimizer_step: non-finite gradient (no silent clipping)");

  switch (opt.kind) {
    case OptimizerSpec::Kind::sgd:
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= opt.lr * grad[i];
      return;
    case OptimizerSpec::Kind::adam: {
      if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
        state.t = 0;
      }
      state.t += 1;
      const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.t));
      const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.t));
      for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = opt.beta1 * state.m[i] + (1.0 - opt.beta1) * grad[i];
        state.v[i] = opt.beta2 * state.v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
      }
      return;
    }
  }
}

std::function<DomainPoint(const ContextVector&)> make_predictor(const AmortModel& model,
                                                                const ModelParams& params,
                                                                const ProblemFamily& family,
                                                                const GradModeSpec& mode) {
  if (mode.mode == GradMode::imaml) {
    const double lambda = mode.lambda;
    const double tol = mode.imaml_tol;
    const int iters = mode.imaml_max_iters;
    return [&model, params, &family, lambda, tol, iters](const ContextVector& x) {
      (void)model;
      return imaml_inner_solve(family, x, params.theta, lambda, tol, iters).y;
    };
  }
  return [&model, params, &family](const ContextVector& x) {
    return model.forward(params, family, x, nullptr);
  };
}

TrainResult train(const AmortModel& model, const ProblemFamily& family, const LossSpec& loss,
                  const GradModeSpec& mode, const OptimizerSpec& opt, const TrainOptions& options,
                  const ModelParams* init) {
  Rng root(options.seed);
  Rng ctx_rng = root.split();
  Rng val_rng = root.split();
  Rng init_rng = root.split();
  Rng batch_rng = root.split();
  Rng es_rng = root.split();

  const std::vector<ContextVector> train_ctxs =
      sample_contexts(family, ctx_rng, options.n_train);
  const std::vector<ContextVector> val_ctxs = sample_contexts(family, val_rng, options.n_val);

  TrainResult result;
  result.params = init ? *init : model.init_params(init_rng);
  validate_params(result.params);

  // oracle values for the validation gap, computed once
  Vec val_oracle_values(val_ctxs.size(), 0.0);
  const bool can_gap = family.has_oracle();
  if (can_gap)
    parallel_for(val_ctxs.size(), [&](std::size_t i) {
      val_oracle_values[i] = family.eval(family.oracle(val_ctxs[i]), val_ctxs[i]);
    });

  // ground-truth solutions for regression losses, computed once
  std::vector<DomainPoint> train_oracles;
  const bool needs_oracle = loss_needs_oracle(loss);
  if (needs_oracle) {
    train_oracles.resize(train_ctxs.size());
    parallel_for(train_ctxs.size(),
                 [&](std::size_t i) { train_oracles[i] = oracle_or_throw(family, train_ctxs[i]); });
  }

  auto eval_val_gap = [&]() {
    if (!can_gap) return 0.0;
    const auto predict = make_predictor(model, result.params, family, mode);
    return amortization_gap_with_ref(family, predict, val_ctxs, val_oracle_values).mean_gap;
  };
  result.initial_val_gap = eval_val_gap();

  OptState opt_state;
  double last_val_gap = result.initial_val_gap;
  const int param_dim = static_cast<int>(result.params.theta.size());

  for (long step = 1; step <= options.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<int> idx(options.batch);
    for (int b = 0; b < options.batch; ++b)
      idx[b] = static_cast<int>(batch_rng.next_u64() %
                                static_cast<std::uint64_t>(options.n_train));

    Vec grad(param_dim, 0.0);
    double batch_loss = 0.0;

    if (mode.mode == GradMode::es) {
      std::vector<ContextVector> batch_ctxs;
      batch_ctxs.reserve(options.batch);
      for (int b : idx) batch_ctxs.push_back(train_ctxs[b]);
      grad = es_gradient(model, result.params, family, batch_ctxs, loss, mode.sigma,
                         mode.pop_size, es_rng);
      for (int b : idx) {
        IterateTrace trace;
        model.forward(result.params, family, train_ctxs[b], &trace);
        batch_loss += loss_value(loss, family, train_ctxs[b], trace,
                                 needs_oracle ? &train_oracles[b] : nullptr);
      }
      batch_loss /= static_cast<double>(options.batch);
    } else {
      // per-context gradients in parallel slots, reduced in index order so
      // the result is independent of the thread count
      std::vector<Vec> slot_grads(options.batch);
      Vec slot_losses(options.batch, 0.0);
      std::exception_ptr first_error;
      parallel_for(static_cast<std::size_t>(options.batch), [&](std::size_t b) {
        try {
          const ContextVector& x = train_ctxs[idx[b]];
          slot_grads[b] = outer_gradient(model, result.params, family, x, loss, mode, nullptr);
          IterateTrace trace;
          model.forward(result.params, family, x, &trace);
          slot_losses[b] = loss_value(loss, family, x, trace,
                                      needs_oracle ? &train_oracles[idx[b]] : nullptr);
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
          if (!first_error) first_error = std::current_exception();
        }
      });
      if (first_error) {
        try {
          std::rethrow_exception(first_error);
        } catch (const std::exception& e) {
          throw std::runtime_error("train: step " + std::to_string(step) + ": " + e.what());
        }
      }
      for (int b = 0; b < options.batch; ++b) {
        axpy(1.0, slot_grads[b], grad);
        batch_loss += slot_losses[b];
      }
      for (double& g : grad) g /= static_cast<double>(options.batch);
      batch_loss /= static_cast<double>(options.batch);
    }

    double gnorm = norm2(grad);
    if (options.clip_norm > 0.0 && gnorm > options.clip_norm) {
      const double s = options.clip_norm / gnorm;
      for (double& g : grad) g *= s;
    }

    try {
      optimizer_step(opt, opt_state, result.params.theta, grad);
    } catch (const std::exception& e) {
      throw std::runtime_error("train: step " + std::to_string(step) + ": " + e.what());
    }

    if (options.val_every > 0 && (step % options.val_every == 0 || step == options.steps))
      last_val_gap = eval_val_gap();

    const auto t1 = std::chrono::steady_clock::now();
    MetricsRow row;
    row.step = step;
    row.train_loss = batch_loss;
    row.val_mean_gap = last_val_gap;
    row.grad_norm = gnorm;
    row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    result.history.push_back(row);
  }

  if (can_gap) {
    const auto predict = make_predictor(model, result.params, family, mode);
    result.final_gap = amortization_gap_with_ref(family, predict, val_ctxs, val_oracle_values);
  }
  return result;
}

}  // namespace amort
