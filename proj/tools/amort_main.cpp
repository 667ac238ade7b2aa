// Command-line experiment runner: train / eval / gradcheck / bench / solve.
// Exit codes: 0 success, 1 validation error, 2 numeric failure.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "amort/bench.hpp"
#include "amort/config.hpp"
#include "amort/gradcheck.hpp"
#include "amort/learning.hpp"
#include "amort/parallel.hpp"

namespace fs = std::filesystem;
using namespace amort;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumeric = 2;

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path.string());
  json j;
  in >> j;
  return j;
}

int cmd_train(const std::string& config_path, const std::string& out_override,
              long seed_override, bool has_seed) {
  json raw = read_json_file(config_path);
  if (has_seed) raw["seed"] = seed_override;
  ExperimentConfig cfg = parse_experiment_config(raw);
  const fs::path out_dir = out_override.empty() ? fs::path(cfg.output_dir)
                                                : fs::path(out_override);
  fs::create_directories(out_dir);

  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult res =
      train(*cfg.model, cfg.family, cfg.loss, cfg.grad_mode, cfg.optimizer, cfg.train);
  const auto t1 = std::chrono::steady_clock::now();

  write_metrics_csv(out_dir / "metrics.csv", res.history);
  save_checkpoint(out_dir / "checkpoint.json", cfg.model_kind, cfg.model_spec, res.params);

  RunRecord record;
  record.config_hash = config_hash(cfg.raw);
  record.config = cfg.raw;
  record.initial_val_gap = res.initial_val_gap;
  record.final_gap = res.final_gap;
  record.checkpoint_path = "checkpoint.json";
  record.metrics_path = "metrics.csv";
  record.wall_ms_total = std::chrono::duration<double, std::milli>(t1 - t0).count();
  write_run_record(out_dir / "run.json", record);

  std::printf("config_hash %s\n", record.config_hash.c_str());
  std::printf("initial_val_mean_gap %s\n", exact_double(res.initial_val_gap).c_str());
  std::printf("final_val_mean_gap %s\n", exact_double(res.final_gap.mean_gap).c_str());
  std::printf("wrote %s\n", out_dir.string().c_str());
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& family_config_path, int n,
             long seed) {
  if (n <= 0) throw std::invalid_argument("empty evaluation set (need --n >= 1)");
  const json fam_json = read_json_file(family_config_path);
  const json fam_spec = fam_json.contains("family") ? fam_json["family"] : fam_json;
  const ProblemFamily family = family_from_json(fam_spec);

  const Checkpoint ck = load_checkpoint(checkpoint_path);
  json model_json = {{"kind", ck.model_kind}, {"spec", ck.spec}};
  const auto model = model_from_json(model_json, family);
  if (model->param_layout() != ck.params.layout)
    throw std::invalid_argument(
        "checkpoint layout does not match the model spec for this family");

  Rng rng(static_cast<std::uint64_t>(seed));
  const auto contexts = sample_contexts(family, rng, n);
  const GapReport rep = amortization_gap(
      family,
      [&](const ContextVector& x) { return model->forward(ck.params, family, x, nullptr); },
      contexts);

  json out;
  out["n"] = n;
  out["seed"] = seed;
  out["mean_gap"] = rep.mean_gap;
  out["max_gap"] = rep.max_gap;
  out["per_context"] = rep.per_context;
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int cmd_gradcheck(const std::string& scope, const std::string& inject_fault) {
  const auto results = run_gradchecks(scope, inject_fault);
  const int failures = print_check_table(results);
  if (failures > 0) {
    std::fprintf(stderr, "%d gradcheck failure(s)\n", failures);
    return kExitNumeric;
  }
  return kExitOk;
}

int cmd_bench(const std::string& suite, const std::string& out_dir, long seed, double scale) {
  const json report =
      run_bench_suite(suite, out_dir.empty() ? fs::path("bench_out") : fs::path(out_dir),
                      static_cast<std::uint64_t>(seed), scale);
  std::cout << report.dump(2) << "\n";
  for (const auto& [key, value] : report.items())
    if (key.rfind("pass", 0) == 0 && value.is_boolean() && !value.get<bool>()) {
      std::fprintf(stderr, "bench criterion failed: %s\n", key.c_str());
      return kExitNumeric;
    }
  if (report.contains("second_order"))
    for (const char* mode : {"second_order", "first_order"})
      if (!report[mode]["pass"].get<bool>()) {
        std::fprintf(stderr, "bench criterion failed: %s\n", mode);
        return kExitNumeric;
      }
  return kExitOk;
}

int cmd_solve(const std::string& family_config_path, long seed, int count) {
  const json fam_json = read_json_file(family_config_path);
  const json fam_spec = fam_json.contains("family") ? fam_json["family"] : fam_json;
  const ProblemFamily family = family_from_json(fam_spec);
  if (!family.has_oracle()) throw std::invalid_argument("family has no oracle solver");

  Rng rng(static_cast<std::uint64_t>(seed));
  json out = json::array();
  for (int i = 0; i < count; ++i) {
    const ContextVector x = family.sample(rng);
    const DomainPoint y = family.oracle(x);
    json row;
    row["context"] = x.data;
    row["solution"] = y;
    row["objective_value"] = family.eval(y, x);
    row["stationarity"] = stationarity_residual(family, y, x);
    out.push_back(row);
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"amort: amortized-optimization experiment runner"};
  app.require_subcommand(1);

  std::string config_path, out_dir, scope = "all", suite, checkpoint_path, inject_fault;
  long seed = 0;
  bool seed_given = false;
  int n_eval = 128;
  int n_solve = 1;
  double scale = 1.0;
  bool serial = false;
  app.add_flag("--serial", serial, "disable the OpenMP kernels for this run");

  auto* train_cmd = app.add_subcommand("train", "train a model from a JSON config");
  train_cmd->add_option("--config", config_path, "experiment config path")->required();
  train_cmd->add_option("--out", out_dir, "output directory (overrides config)");
  train_cmd->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
    seed_given = true;
  });

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint's amortization gap");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint.json path")->required();
  eval_cmd->add_option("--config", config_path, "family config path")->required();
  eval_cmd->add_option("--n", n_eval, "number of fresh contexts");
  eval_cmd->add_option("--seed", seed, "context sampling seed");

  auto* grad_cmd = app.add_subcommand("gradcheck", "run the finite-difference invariants");
  grad_cmd->add_option("--scope", scope, "all or a module name");
  grad_cmd->add_option("--inject-fault", inject_fault,
                       "negate one component of the named check (test hook)");

  auto* bench_cmd = app.add_subcommand("bench", "run a scripted comparison suite");
  bench_cmd->add_option("--suite", suite, "sphere | lista | maml_quad | fixedpoint | maxq")
      ->required();
  bench_cmd->add_option("--out", out_dir, "output directory");
  bench_cmd->add_option("--seed", seed, "suite seed");
  bench_cmd->add_option("--scale", scale, "training budget scale in (0, 1]");

  auto* solve_cmd = app.add_subcommand("solve", "sample contexts and solve with the oracle");
  solve_cmd->add_option("--config", config_path, "family config path")->required();
  solve_cmd->add_option("--seed", seed, "context sampling seed");
  solve_cmd->add_option("--n", n_solve, "number of instances");

  CLI11_PARSE(app, argc, argv);
  if (serial) set_parallel_enabled(false);

  try {
    if (train_cmd->parsed()) return cmd_train(config_path, out_dir, seed, seed_given);
    if (eval_cmd->parsed()) return cmd_eval(checkpoint_path, config_path, n_eval, seed);
    if (grad_cmd->parsed()) return cmd_gradcheck(scope, inject_fault);
    if (bench_cmd->parsed()) return cmd_bench(suite, out_dir, seed, scale);
    if (solve_cmd->parsed()) return cmd_solve(config_path, seed, n_solve);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  }
  return kExitValidation;
}
