#include "amort/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "amort/config.hpp"
#include "amort/fixedpoint.hpp"
#include "amort/learning.hpp"
#include "amort/objectives.hpp"
#include "amort/parallel.hpp"
#include "amort/projections.hpp"

namespace amort {

namespace fs = std::filesystem;

std::vector<ContextVector> sample_contexts_fp(const FpFamily& fam, Rng& rng, int count);

namespace {

long scaled_steps(long steps, double scale) {
  return std::max<long>(1, static_cast<long>(std::lround(steps * scale)));
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

void write_report(const fs::path& out_dir, const std::string& suite, const json& report) {
  write_text(out_dir / (suite + "_report.json"), report.dump(2) + "\n");
}

std::string curve_csv(const std::vector<MetricsRow>& rows) {
  std::string csv = "step,train_loss,val_mean_gap,grad_norm\n";
  for (const auto& r : rows)
    csv += std::to_string(r.step) + "," + exact_double(r.train_loss) + "," +
           exact_double(r.val_mean_gap) + "," + exact_double(r.grad_norm) + "\n";
  return csv;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// --- sphere ------------------------------------------------------------------
json bench_sphere(const fs::path& out_dir, std::uint64_t seed, double scale) {
  const ProblemFamily fam = make_sphere_family({});
  MlpSpec spec;
  spec.input_dim = fam.ctx_dim;
  spec.hidden_dims = {64, 64};
  spec.output_dim = 3;
  const auto model = make_mlp_model(spec);

  TrainOptions opt;
  opt.n_train = 8192;
  opt.n_val = 512;
  opt.batch = 128;
  opt.steps = scaled_steps(6000, scale);
  opt.seed = seed;
  opt.val_every = 100;
  const LossSpec obj{LossKind::obj, LossKind::obj, {}};
  const OptimizerSpec adam{OptimizerSpec::Kind::adam, 1e-3, 0.9, 0.999, 1e-8};

  const TrainResult res = train(*model, fam, obj, {GradMode::full_unroll}, adam, opt);

  // held-out predictions vs the grid-refined oracle
  Rng eval_rng(seed + 77);
  const auto held_out = sample_contexts(fam, eval_rng, 512);
  std::string rows = "context_id,pred_x,pred_y,pred_z,oracle_x,oracle_y,oracle_z,gap\n";
  int within = 0;
  Vec gaps(held_out.size(), 0.0);
  std::vector<Vec> preds(held_out.size()), oracles(held_out.size());
  parallel_for(held_out.size(), [&](std::size_t i) {
    const Vec raw = model->forward(res.params, fam, held_out[i], nullptr);
    preds[i] = proj_sphere(raw);
    oracles[i] = proj_sphere(fam.oracle(held_out[i]));
    gaps[i] = fam.eval(raw, held_out[i]) - fam.eval(oracles[i], held_out[i]);
  });
  for (std::size_t i = 0; i < held_out.size(); ++i) {
    if (geodesic_distance(preds[i], oracles[i]) <= 0.2) ++within;
    rows += std::to_string(i);
    for (int k = 0; k < 3; ++k) rows += "," + exact_double(preds[i][k]);
    for (int k = 0; k < 3; ++k) rows += "," + exact_double(oracles[i][k]);
    rows += "," + exact_double(gaps[i]) + "\n";
  }
  write_text(out_dir / "sphere_predictions.csv", rows);
  write_text(out_dir / "sphere_curve.csv", curve_csv(res.history));

  double gap_sum = 0.0;
  for (double g : gaps) gap_sum += g;

  json report;
  report["suite"] = "sphere";
  report["steps"] = opt.steps;
  report["initial_val_mean_gap"] = res.initial_val_gap;
  report["final_val_mean_gap"] = res.final_gap.mean_gap;
  report["held_out_mean_gap"] = gap_sum / static_cast<double>(gaps.size());
  report["gap_ratio"] = res.final_gap.mean_gap / res.initial_val_gap;
  report["frac_within_geodesic_0.2"] = static_cast<double>(within) / held_out.size();
  report["pass_gap_ratio"] = res.final_gap.mean_gap <= 0.1 * res.initial_val_gap;
  report["pass_geodesic"] = within >= static_cast<int>(0.8 * held_out.size());
  return report;
}

// --- lista -------------------------------------------------------------------
json bench_lista(const fs::path& out_dir, std::uint64_t seed, double scale) {
  const int m = 10, n = 32, K = 5;
  const ProblemFamily fam = make_sparse_coding_family(m, n, 0.1, 2024);
  const SparseCodingFamilyConfig& cfg = sparse_coding_config(fam);
  const auto model = make_lista_model(K, cfg);

  TrainOptions opt;
  opt.n_train = 2048;
  opt.n_val = 256;
  opt.batch = 64;
  opt.steps = scaled_steps(4000, scale);
  opt.seed = seed;
  opt.val_every = 100;
  const LossSpec reg{LossKind::reg, LossKind::reg, {}};
  const OptimizerSpec adam{OptimizerSpec::Kind::adam, 2e-3, 0.9, 0.999, 1e-8};
  const TrainResult res = train(*model, fam, reg, {GradMode::full_unroll}, adam, opt);

  // held-out energies per iteration count
  Rng eval_rng(seed + 55);
  const auto held_out = sample_contexts(fam, eval_rng, 256);
  Rng dummy(0);
  const ModelParams ista_params = model->init_params(dummy);

  Vec e_lista(K + 1, 0.0), e_ista(K + 1, 0.0);
  double e_fista = 0.0, e_lista_init = 0.0;
  for (const auto& x : held_out) {
    IterateTrace trained_tr, init_tr;
    model->forward(res.params, fam, x, &trained_tr);
    model->forward(ista_params, fam, x, &init_tr);
    for (int k = 0; k <= K; ++k) {
      e_lista[k] += fam.eval(trained_tr.iterates[k], x);
      e_ista[k] += fam.eval(init_tr.iterates[k], x);
    }
    e_lista_init += fam.eval(init_tr.iterates[K], x);
    e_fista += fam.eval(fam.oracle(x), x);
  }
  const double cnt = static_cast<double>(held_out.size());
  for (int k = 0; k <= K; ++k) {
    e_lista[k] /= cnt;
    e_ista[k] /= cnt;
  }
  e_fista /= cnt;
  e_lista_init /= cnt;

  std::string rows = "K,mean_energy_lista,mean_energy_ista,mean_energy_fista\n";
  for (int k = 0; k <= K; ++k)
    rows += std::to_string(k) + "," + exact_double(e_lista[k]) + "," + exact_double(e_ista[k]) +
            "," + exact_double(e_fista) + "\n";
  write_text(out_dir / "lista_energies.csv", rows);
  write_text(out_dir / "lista_curve.csv", curve_csv(res.history));

  const double gap_trained = e_lista[K] - e_fista;
  const double gap_init = e_lista_init - e_fista;
  json report;
  report["suite"] = "lista";
  report["steps"] = opt.steps;
  report["mean_energy_lista_K5"] = e_lista[K];
  report["mean_energy_ista_K5"] = e_ista[K];
  report["mean_energy_fista"] = e_fista;
  report["oracle_gap_trained"] = gap_trained;
  report["oracle_gap_ista_init"] = gap_init;
  report["gap_shrink"] = 1.0 - gap_trained / gap_init;
  report["pass_beats_ista"] = e_lista[K] < e_ista[K];
  report["pass_gap_shrink"] = gap_trained <= 0.5 * gap_init;
  return report;
}

// --- maml on quadratics ------------------------------------------------------
json bench_maml_quad(const fs::path& out_dir, std::uint64_t seed, double scale) {
  const int n = 8, K = 5;
  const ProblemFamily fam = make_quadratic_family(n, 0.1, 1.0);
  const LearnedInitGdSpec gd{K, 0.5};

  TrainOptions opt;
  opt.n_train = 1024;
  opt.n_val = 128;
  opt.batch = 32;
  opt.steps = scaled_steps(1500, scale);
  opt.seed = seed;
  opt.val_every = 100;
  const LossSpec obj{LossKind::obj, LossKind::obj, {}};
  const OptimizerSpec adam{OptimizerSpec::Kind::adam, 1e-2, 0.9, 0.999, 1e-8};

  Rng eval_rng(seed + 99);
  const auto tasks = sample_contexts(fam, eval_rng, 128);

  auto post_adaptation = [&](const Vec& theta0) {
    double total = 0.0;
    for (const auto& x : tasks) {
      ModelParams p{theta0, {{"y0", {n}}}};
      total += fam.eval(learned_init_gd_forward(gd, p, fam, x).first, x);
    }
    return total / static_cast<double>(tasks.size());
  };

  json report;
  report["suite"] = "maml_quad";
  report["steps"] = opt.steps;

  std::string curve_all;
  for (const char* mode_name : {"second_order", "first_order"}) {
    const auto model = make_learned_init_gd_model(gd, n);
    GradModeSpec mode;
    mode.mode =
        std::string(mode_name) == "second_order" ? GradMode::full_unroll : GradMode::first_order;
    const TrainResult res = train(*model, fam, obj, mode, adam, opt);
    const double learned = post_adaptation(res.params.theta);

    // 32 random initializations on the same held-out tasks
    Rng init_rng(seed + 7);
    double random_mean = 0.0;
    for (int r = 0; r < 32; ++r) random_mean += post_adaptation(init_rng.normal_vec(n));
    random_mean /= 32.0;

    report[mode_name] = {{"post_adaptation_learned", learned},
                         {"post_adaptation_random_mean", random_mean},
                         {"pass", learned < random_mean}};
    write_text(out_dir / (std::string("maml_curve_") + mode_name + ".csv"),
               curve_csv(res.history));
  }
  (void)curve_all;
  return report;
}

// --- fixed-point suite ---------------------------------------------------------
json bench_fixedpoint(const fs::path& out_dir, std::uint64_t seed, double scale) {
  const int n = 8;
  json report;
  report["suite"] = "fixedpoint";

  // AA(M=5) vs plain iteration at spectral radius 0.95
  {
    const FpFamily fam = make_affine_fp_family(n, 0.95, 0.95);
    Rng rng(seed + 11);
    std::vector<double> plain_iters, aa_iters;
    for (int inst = 0; inst < 50; ++inst) {
      const FixedPointMap map = fam.make_map(fam.sample(rng));
      const Vec y0(n, 0.0);
      plain_iters.push_back(plain_iterate(map, y0, 5000, 1e-8).iters);
      aa_iters.push_back(aa_solve(map, y0, 5, 5000, 1e-8).iters);
    }
    report["plain_median_iters_to_1e-8"] = median(plain_iters);
    report["aa5_median_iters_to_1e-8"] = median(aa_iters);
    report["pass_aa_beats_plain"] = median(aa_iters) < median(plain_iters);
  }

  // learned acceleration trained with the NeuralFP loss
  {
    const FpFamily fam = make_affine_fp_family(n, 0.7, 0.97);
    LearnedAccelSpec spec;
    spec.n = n;
    spec.ctx_dim = fam.ctx_dim;
    spec.M = 3;
    spec.hidden = 32;
    const int K = 10;

    Rng root(seed + 13);
    Rng ctx_rng = root.split();
    const auto train_ctxs = sample_contexts_fp(fam, ctx_rng, 512);
    Rng init_rng = root.split();
    ModelParams params = learned_accel_init_params(spec, init_rng);
    Rng batch_rng = root.split();

    const OptimizerSpec adam{OptimizerSpec::Kind::adam, 1e-3, 0.9, 0.999, 1e-8};
    OptState state;
    const long steps = scaled_steps(1500, scale);
    const int batch = 16;
    std::string curve = "step,neuralfp_loss\n";
    for (long step = 1; step <= steps; ++step) {
      std::vector<int> idx(batch);
      for (int b = 0; b < batch; ++b)
        idx[b] = static_cast<int>(batch_rng.next_u64() % train_ctxs.size());
      std::vector<Vec> slot_grads(batch);
      Vec slot_loss(batch, 0.0);
      parallel_for(static_cast<std::size_t>(batch), [&](std::size_t b) {
        const FixedPointMap map = fam.make_map(train_ctxs[idx[b]]);
        const LearnedAccelResult fwd = learned_accel_solve(map, spec, params, K);
        const double norm_const = neuralfp_default_normalization(fwd.trace);
        slot_loss[b] = neuralfp_loss(fwd.trace, norm_const);
        slot_grads[b] = neuralfp_grad(map, spec, params, K, norm_const);
      });
      Vec grad(params.theta.size(), 0.0);
      double loss = 0.0;
      for (int b = 0; b < batch; ++b) {
        axpy(1.0 / batch, slot_grads[b], grad);
        loss += slot_loss[b] / batch;
      }
      optimizer_step(adam, state, params.theta, grad);
      if (step % 25 == 0 || step == steps)
        curve += std::to_string(step) + "," + exact_double(loss) + "\n";
    }
    write_text(out_dir / "fixedpoint_training_curve.csv", curve);

    // held-out comparison: iterations to |R| <= 1e-6
    Rng held_rng(seed + 17);
    const auto held = sample_contexts_fp(fam, held_rng, 64);
    std::vector<double> plain_iters, learned_iters;
    const int cap = 2000;
    for (const auto& x : held) {
      const FixedPointMap map = fam.make_map(x);
      const FpResult plain = plain_iterate(map, Vec(n, 0.0), cap, 1e-6);
      plain_iters.push_back(plain.converged ? plain.iters : cap + 1);
      const LearnedAccelResult lr = learned_accel_solve(map, spec, params, cap, 1e-6, true);
      learned_iters.push_back(lr.converged ? lr.iters : cap + 1);
    }
    report["zero_init_plain_median_iters_to_1e-6"] = median(plain_iters);
    report["learned_median_iters_to_1e-6"] = median(learned_iters);
    report["pass_learned_beats_plain"] = median(learned_iters) < median(plain_iters);

    std::string rows = "method,median_iters_to_1e-6\n";
    rows += "zero_init_plain," + exact_double(median(plain_iters)) + "\n";
    rows += "learned_accel," + exact_double(median(learned_iters)) + "\n";
    write_text(out_dir / "fixedpoint_methods.csv", rows);
  }
  return report;
}

// --- maxq ----------------------------------------------------------------------
json bench_maxq(const fs::path& out_dir, std::uint64_t seed, double scale) {
  const int s_dim = 6, u_dim = 4;
  const ProblemFamily fam = make_maxq_family(s_dim, u_dim, 404);
  MlpSpec lin;
  lin.input_dim = s_dim;
  lin.output_dim = u_dim;
  const auto model = make_mlp_model(lin);

  TrainOptions opt;
  opt.n_train = 4096;
  opt.n_val = 128;
  opt.batch = 64;
  opt.steps = scaled_steps(5000, scale);
  opt.seed = seed;
  opt.val_every = 200;
  const LossSpec obj{LossKind::obj, LossKind::obj, {}};
  const OptimizerSpec adam{OptimizerSpec::Kind::adam, 5e-3, 0.9, 0.999, 1e-8};
  const TrainResult res = train(*model, fam, obj, {GradMode::full_unroll}, adam, opt);

  // analytic policy P^{-1} R
  const Matrix& p = maxq_p_matrix(fam);
  const Matrix& r = maxq_r_matrix(fam);
  Matrix analytic(u_dim, s_dim);
  for (int j = 0; j < s_dim; ++j) {
    Vec col(u_dim);
    for (int i = 0; i < u_dim; ++i) col[i] = r(i, j);
    const Vec sol = cholesky_solve(p, col);
    for (int i = 0; i < u_dim; ++i) analytic(i, j) = sol[i];
  }
  Matrix learned(u_dim, s_dim);
  for (int i = 0; i < u_dim; ++i)
    for (int j = 0; j < s_dim; ++j)
      learned(i, j) = res.params.theta[static_cast<std::size_t>(i) * s_dim + j];
  Matrix diff(u_dim, s_dim);
  for (std::size_t i = 0; i < diff.data.size(); ++i)
    diff.data[i] = learned.data[i] - analytic.data[i];
  const double err = operator_norm(diff);
  double bias_norm = 0.0;
  for (int i = 0; i < u_dim; ++i) {
    const double b = res.params.theta[static_cast<std::size_t>(u_dim) * s_dim + i];
    bias_norm += b * b;
  }
  bias_norm = std::sqrt(bias_norm);

  write_text(out_dir / "maxq_curve.csv", curve_csv(res.history));
  json report;
  report["suite"] = "maxq";
  report["steps"] = opt.steps;
  report["operator_norm_error"] = err;
  report["bias_norm"] = bias_norm;
  report["final_val_mean_gap"] = res.final_gap.mean_gap;
  report["pass_operator_norm"] = err <= 1e-3;
  return report;
}

}  // namespace

// contexts for a fixed-point family (FpFamily has its own sampling contract)
std::vector<ContextVector> sample_contexts_fp(const FpFamily& fam, Rng& rng, int count) {
  std::vector<ContextVector> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(fam.sample(rng));
  return out;
}

json run_bench_suite(const std::string& suite, const fs::path& out_dir, std::uint64_t seed,
                     double scale) {
  fs::create_directories(out_dir);
  json report;
  if (suite == "sphere")
    report = bench_sphere(out_dir, seed, scale);
  else if (suite == "lista")
    report = bench_lista(out_dir, seed, scale);
  else if (suite == "maml_quad")
    report = bench_maml_quad(out_dir, seed, scale);
  else if (suite == "fixedpoint")
    report = bench_fixedpoint(out_dir, seed, scale);
  else if (suite == "maxq")
    report = bench_maxq(out_dir, seed, scale);
  else
    throw std::invalid_argument("unknown bench suite: " + suite);
  report["seed"] = seed;
  report["scale"] = scale;
  write_report(out_dir, suite, report);
  return report;
}

}  // namespace amort
