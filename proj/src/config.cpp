#include "amort/config.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>

#include "amort/objectives.hpp"

namespace amort {

namespace {

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
  throw std::invalid_argument("config error at '" + where + "': " + what);
}

void check_keys(const json& obj, const std::vector<std::string>& allowed,
                const std::string& where) {
  if (!obj.is_object()) config_error(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool ok = false;
    for (const auto& a : allowed) ok |= (key == a);
    if (!ok) config_error(where + "." + key, "unknown key");
  }
}

double get_num(const json& obj, const std::string& key, const std::string& where,
               const double* fallback = nullptr) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    config_error(where + "." + key, "missing required number");
  }
  if (!obj[key].is_number()) config_error(where + "." + key, "expected a number");
  return obj[key].get<double>();
}

long get_int(const json& obj, const std::string& key, const std::string& where,
             const long* fallback = nullptr) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    config_error(where + "." + key, "missing required integer");
  }
  if (!obj[key].is_number_integer()) config_error(where + "." + key, "expected an integer");
  return obj[key].get<long>();
}

std::string get_str(const json& obj, const std::string& key, const std::string& where,
                    const char* fallback = nullptr) {
  if (!obj.contains(key)) {
    if (fallback) return fallback;
    config_error(where + "." + key, "missing required string");
  }
  if (!obj[key].is_string()) config_error(where + "." + key, "expected a string");
  return obj[key].get<std::string>();
}

}  // namespace

ProblemFamily family_from_json(const json& spec) {
  check_keys(spec, {"name", "params"}, "family");
  const std::string name = get_str(spec, "name", "family");
  const json params = spec.value("params", json::object());

  if (name == "quadratic") {
    check_keys(params, {"n", "eig_lo", "eig_hi"}, "family.params");
    const long n = get_int(params, "n", "family.params");
    const double lo_def = 0.1, hi_def = 1.0;
    return make_quadratic_family(static_cast<int>(n),
                                 get_num(params, "eig_lo", "family.params", &lo_def),
                                 get_num(params, "eig_hi", "family.params", &hi_def));
  }
  if (name == "sparse_coding") {
    check_keys(params, {"m", "n", "alpha", "dict_seed"}, "family.params");
    const long seed_def = 0;
    return make_sparse_coding_family(
        static_cast<int>(get_int(params, "m", "family.params")),
        static_cast<int>(get_int(params, "n", "family.params")),
        get_num(params, "alpha", "family.params"),
        static_cast<std::uint64_t>(get_int(params, "dict_seed", "family.params", &seed_def)));
  }
  if (name == "sphere") {
    check_keys(params, {"m", "gamma", "var_beta", "oracle_grid", "oracle_refine"},
               "family.params");
    SphereFamilyConfig cfg;
    const long m_def = cfg.m;
    const double g_def = cfg.gamma, b_def = cfg.var_beta;
    const long grid_def = cfg.oracle_grid, refine_def = cfg.oracle_refine;
    cfg.m = static_cast<int>(get_int(params, "m", "family.params", &m_def));
    cfg.gamma = get_num(params, "gamma", "family.params", &g_def);
    cfg.var_beta = get_num(params, "var_beta", "family.params", &b_def);
    cfg.oracle_grid = static_cast<int>(get_int(params, "oracle_grid", "family.params", &grid_def));
    cfg.oracle_refine =
        static_cast<int>(get_int(params, "oracle_refine", "family.params", &refine_def));
    return make_sphere_family(cfg);
  }
  if (name == "maxq") {
    check_keys(params, {"state_dim", "control_dim", "seed"}, "family.params");
    const long seed_def = 0;
    return make_maxq_family(
        static_cast<int>(get_int(params, "state_dim", "family.params")),
        static_cast<int>(get_int(params, "control_dim", "family.params")),
        static_cast<std::uint64_t>(get_int(params, "seed", "family.params", &seed_def)));
  }
  config_error("family.name", "unknown family '" + name + "'");
}

std::shared_ptr<AmortModel> model_from_json(const json& spec, const ProblemFamily& family) {
  check_keys(spec, {"kind", "spec"}, "model");
  const std::string kind = get_str(spec, "kind", "model");
  const json s = spec.value("spec", json::object());

  if (kind == "mlp") {
    check_keys(s, {"hidden", "activation"}, "model.spec");
    MlpSpec mspec;
    mspec.input_dim = family.ctx_dim;
    mspec.output_dim = family.n;
    if (s.contains("hidden")) {
      if (!s["hidden"].is_array()) config_error("model.spec.hidden", "expected an array");
      for (const auto& h : s["hidden"]) mspec.hidden_dims.push_back(h.get<int>());
    }
    mspec.activation = activation_from_name(get_str(s, "activation", "model.spec", "tanh"));
    return make_mlp_model(mspec);
  }
  if (kind == "identity") {
    check_keys(s, {}, "model.spec");
    return make_identity_model(family.n);
  }
  if (kind == "oracle") {
    check_keys(s, {}, "model.spec");
    return make_oracle_model();
  }
  if (kind == "learned_init") {
    check_keys(s, {"K", "alpha"}, "model.spec");
    LearnedInitGdSpec gspec;
    gspec.K = static_cast<int>(get_int(s, "K", "model.spec"));
    gspec.alpha = get_num(s, "alpha", "model.spec");
    return make_learned_init_gd_model(gspec, family.n);
  }
  if (kind == "learned_step") {
    check_keys(s, {"K"}, "model.spec");
    return make_learned_step_gd_model({static_cast<int>(get_int(s, "K", "model.spec"))},
                                      family.n);
  }
  if (kind == "lista") {
    check_keys(s, {"K"}, "model.spec");
    if (family.name != "sparse_coding")
      config_error("model.kind", "lista requires the sparse_coding family");
    return make_lista_model(static_cast<int>(get_int(s, "K", "model.spec")),
                            sparse_coding_config(family));
  }
  config_error("model.kind", "unknown model kind '" + kind + "'");
}

LossSpec loss_from_json(const json& spec, int num_iterates) {
  check_keys(spec, {"kind", "inner", "weights"}, "loss");
  LossSpec loss;
  const std::string kind = get_str(spec, "kind", "loss");
  if (kind == "reg")
    loss.kind = LossKind::reg;
  else if (kind == "obj")
    loss.kind = LossKind::obj;
  else if (kind == "sum") {
    loss.kind = LossKind::sum;
    const std::string inner = get_str(spec, "inner", "loss", "obj");
    if (inner == "reg")
      loss.inner_kind = LossKind::reg;
    else if (inner == "obj")
      loss.inner_kind = LossKind::obj;
    else
      config_error("loss.inner", "must be 'reg' or 'obj'");
    if (spec.contains("weights")) {
      for (const auto& w : spec["weights"]) loss.weights.push_back(w.get<double>());
    } else {
      loss.weights.assign(num_iterates, 1.0);
    }
  } else {
    config_error("loss.kind", "must be 'reg', 'obj' or 'sum'");
  }
  return loss;
}

GradModeSpec grad_mode_from_json(const json& spec) {
  check_keys(spec, {"mode", "H", "lambda", "tol", "max_iters", "sigma", "pop_size"},
             "grad_mode");
  GradModeSpec mode;
  const std::string name = get_str(spec, "mode", "grad_mode", "full_unroll");
  if (name == "full_unroll")
    mode.mode = GradMode::full_unroll;
  else if (name == "first_order")
    mode.mode = GradMode::first_order;
  else if (name == "tbptt") {
    mode.mode = GradMode::tbptt;
    mode.H = static_cast<int>(get_int(spec, "H", "grad_mode"));
    if (mode.H < 1) config_error("grad_mode.H", "must be >= 1");
  } else if (name == "imaml") {
    mode.mode = GradMode::imaml;
    mode.lambda = get_num(spec, "lambda", "grad_mode");
    if (!(mode.lambda > 0.0)) config_error("grad_mode.lambda", "must be > 0");
    const double tol_def = mode.imaml_tol;
    mode.imaml_tol = get_num(spec, "tol", "grad_mode", &tol_def);
    const long it_def = mode.imaml_max_iters;
    mode.imaml_max_iters = static_cast<int>(get_int(spec, "max_iters", "grad_mode", &it_def));
  } else if (name == "es") {
    mode.mode = GradMode::es;
    const double sig_def = mode.sigma;
    mode.sigma = get_num(spec, "sigma", "grad_mode", &sig_def);
    if (!(mode.sigma > 0.0)) config_error("grad_mode.sigma", "must be > 0");
    const long pop_def = mode.pop_size;
    mode.pop_size = static_cast<int>(get_int(spec, "pop_size", "grad_mode", &pop_def));
    if (mode.pop_size < 2 || mode.pop_size % 2 != 0)
      config_error("grad_mode.pop_size", "must be even and >= 2");
  } else {
    config_error("grad_mode.mode", "unknown mode '" + name + "'");
  }
  return mode;
}

OptimizerSpec optimizer_from_json(const json& spec) {
  check_keys(spec, {"kind", "lr", "beta1", "beta2", "eps"}, "optimizer");
  OptimizerSpec opt;
  const std::string kind = get_str(spec, "kind", "optimizer", "adam");
  if (kind == "sgd")
    opt.kind = OptimizerSpec::Kind::sgd;
  else if (kind == "adam")
    opt.kind = OptimizerSpec::Kind::adam;
  else
    config_error("optimizer.kind", "must be 'sgd' or 'adam'");
  opt.lr = get_num(spec, "lr", "optimizer");
  if (!(opt.lr > 0.0)) config_error("optimizer.lr", "must be > 0");
  const double b1d = opt.beta1, b2d = opt.beta2, epsd = opt.eps;
  opt.beta1 = get_num(spec, "beta1", "optimizer", &b1d);
  opt.beta2 = get_num(spec, "beta2", "optimizer", &b2d);
  opt.eps = get_num(spec, "eps", "optimizer", &epsd);
  if (opt.beta1 < 0.0 || opt.beta1 >= 1.0 || opt.beta2 < 0.0 || opt.beta2 >= 1.0)
    config_error("optimizer.beta", "betas must lie in [0, 1)");
  return opt;
}

ExperimentConfig parse_experiment_config(const json& cfg) {
  check_keys(cfg,
             {"family", "model", "loss", "grad_mode", "optimizer", "seed", "n_train", "n_val",
              "batch", "steps", "val_every", "clip_norm", "output_dir"},
             "config");
  if (!cfg.contains("family")) config_error("config.family", "missing");
  if (!cfg.contains("model")) config_error("config.model", "missing");

  ExperimentConfig out;
  out.family = family_from_json(cfg["family"]);
  out.model = model_from_json(cfg["model"], out.family);
  out.model_kind = get_str(cfg["model"], "kind", "model");
  out.model_spec = cfg["model"].value("spec", json::object());
  out.loss = loss_from_json(cfg.value("loss", json{{"kind", "obj"}}), out.model->num_iterates());
  out.grad_mode = grad_mode_from_json(cfg.value("grad_mode", json{{"mode", "full_unroll"}}));
  out.optimizer =
      optimizer_from_json(cfg.value("optimizer", json{{"kind", "adam"}, {"lr", 1e-3}}));

  const long seed_def = 0, ntr_def = 1024, nval_def = 128, batch_def = 32, steps_def = 1000,
             val_def = 50;
  out.train.seed = static_cast<std::uint64_t>(get_int(cfg, "seed", "config", &seed_def));
  out.train.n_train = static_cast<int>(get_int(cfg, "n_train", "config", &ntr_def));
  out.train.n_val = static_cast<int>(get_int(cfg, "n_val", "config", &nval_def));
  out.train.batch = static_cast<int>(get_int(cfg, "batch", "config", &batch_def));
  out.train.steps = get_int(cfg, "steps", "config", &steps_def);
  out.train.val_every = static_cast<int>(get_int(cfg, "val_every", "config", &val_def));
  if (cfg.contains("clip_norm") && !cfg["clip_norm"].is_null()) {
    const double clip_def = 0.0;
    out.train.clip_norm = get_num(cfg, "clip_norm", "config", &clip_def);
  }
  if (out.train.n_train < 1 || out.train.n_val < 0 || out.train.batch < 1 ||
      out.train.steps < 0)
    config_error("config", "n_train, batch must be >= 1; n_val, steps must be >= 0");
  out.output_dir = get_str(cfg, "output_dir", "config", "out");
  out.raw = cfg;
  return out;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path.string());
  json cfg;
  try {
    in >> cfg;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config parse error in " + path.string() + ": " + e.what());
  }
  return parse_experiment_config(cfg);
}

std::string config_hash(const json& cfg) {
  const std::string canonical = cfg.dump();  // nlohmann objects are key-sorted
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

std::string exact_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_checkpoint(const std::filesystem::path& path, const std::string& model_kind,
                     const json& spec, const ModelParams& params) {
  json j;
  j["format_version"] = 1;
  j["model_kind"] = model_kind;
  j["spec"] = spec;
  json layout = json::array();
  for (const auto& [name, shape] : params.layout) layout.push_back(json::array({name, shape}));
  j["layout"] = layout;
  j["theta"] = params.theta;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open checkpoint: " + path.string());
  json j;
  in >> j;
  Checkpoint ck;
  ck.format_version = j.at("format_version").get<int>();
  if (ck.format_version != 1)
    throw std::invalid_argument("unsupported checkpoint format_version");
  ck.model_kind = j.at("model_kind").get<std::string>();
  ck.spec = j.value("spec", json::object());
  for (const auto& entry : j.at("layout"))
    ck.params.layout.emplace_back(entry.at(0).get<std::string>(),
                                  entry.at(1).get<std::vector<int>>());
  ck.params.theta = j.at("theta").get<Vec>();
  if (layout_size(ck.params.layout) != static_cast<int>(ck.params.theta.size()))
    throw std::invalid_argument("checkpoint layout size does not match theta length");
  return ck;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics: " + path.string());
  out << "step,train_loss,val_mean_gap,grad_norm,wall_ms\n";
  for (const auto& row : rows)
    out << row.step << ',' << exact_double(row.train_loss) << ','
        << exact_double(row.val_mean_gap) << ',' << exact_double(row.grad_norm) << ','
        << exact_double(row.wall_ms) << "\n";
}

void write_run_record(const std::filesystem::path& path, const RunRecord& record) {
  json j;
  j["config_hash"] = record.config_hash;
  j["config"] = record.config;
  j["rng_algorithm"] = Rng::kAlgorithm;
  j["initial_val_gap"] = record.initial_val_gap;
  j["final_gap"] = {{"mean", record.final_gap.mean_gap}, {"max", record.final_gap.max_gap}};
  j["checkpoint"] = record.checkpoint_path;
  j["metrics"] = record.metrics_path;
  j["wall_ms_total"] = record.wall_ms_total;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write run record: " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace amort
