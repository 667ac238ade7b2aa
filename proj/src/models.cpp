#include "amort/models.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace amort {

int layout_size(const std::vector<std::pair<std::string, std::vector<int>>>& layout) {
  int total = 0;
  for (const auto& [name, shape] : layout) {
    int s = 1;
    for (int d : shape) s *= d;
    total += s;
  }
  return total;
}

void validate_params(const ModelParams& params) {
  if (layout_size(params.layout) != static_cast<int>(params.theta.size()))
    throw std::invalid_argument("ModelParams: layout size does not match theta length");
  check_finite(params.theta, "model parameters");
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::tanh_act;
  if (name == "relu") return Activation::relu_act;
  if (name == "softplus") return Activation::softplus_act;
  throw std::invalid_argument("unknown activation: " + name);
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::tanh_act: return "tanh";
    case Activation::relu_act: return "relu";
    case Activation::softplus_act: return "softplus";
  }
  return "?";
}

namespace {

double act_value(Activation a, double z) {
  switch (a) {
    case Activation::tanh_act: return std::tanh(z);
    case Activation::relu_act: return z > 0.0 ? z : 0.0;
    case Activation::softplus_act: return z > 30.0 ? z : std::log1p(std::exp(z));
  }
  return 0.0;
}

double act_deriv(Activation a, double z) {
  switch (a) {
    case Activation::tanh_act: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::relu_act: return z > 0.0 ? 1.0 : 0.0;
    case Activation::softplus_act: return 1.0 / (1.0 + std::exp(-z));
  }
  return 0.0;
}

std::vector<int> mlp_dims(const MlpSpec& spec) {
  std::vector<int> dims;
  dims.push_back(spec.input_dim);
  for (int h : spec.hidden_dims) dims.push_back(h);
  dims.push_back(spec.output_dim);
  return dims;
}

}  // namespace

std::vector<std::pair<std::string, std::vector<int>>> mlp_param_layout(const MlpSpec& spec) {
  std::vector<std::pair<std::string, std::vector<int>>> layout;
  const std::vector<int> dims = mlp_dims(spec);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    layout.emplace_back("W" + std::to_string(l), std::vector<int>{dims[l + 1], dims[l]});
    layout.emplace_back("b" + std::to_string(l), std::vector<int>{dims[l + 1]});
  }
  return layout;
}

ModelParams mlp_init_params(const MlpSpec& spec, Rng& rng) {
  ModelParams p;
  p.layout = mlp_param_layout(spec);
  const std::vector<int> dims = mlp_dims(spec);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    for (int i = 0; i < dims[l + 1] * dims[l]; ++i)
      p.theta.push_back(rng.uniform(-scale, scale));
    for (int i = 0; i < dims[l + 1]; ++i) p.theta.push_back(0.0);
  }
  return p;
}

namespace {
// Forward pass keeping pre-activations for backprop. acts[0] is the input,
// acts[L] the (linear) output.
struct MlpTape {
  std::vector<Vec> pre;
  std::vector<Vec> acts;
};

Vec mlp_run(const MlpSpec& spec, const ModelParams& params, const Vec& input, MlpTape* tape) {
  const std::vector<int> dims = mlp_dims(spec);
  if (static_cast<int>(input.size()) != spec.input_dim)
    throw std::invalid_argument("mlp_forward: input length does not match spec");
  validate_params(params);
  if (layout_size(mlp_param_layout(spec)) != static_cast<int>(params.theta.size()))
    throw std::invalid_argument("mlp_forward: params do not match spec");

  const int layers = static_cast<int>(dims.size()) - 1;
  Vec a = input;
  if (tape) tape->acts.push_back(a);
  std::size_t off = 0;
  for (int l = 0; l < layers; ++l) {
    const int out = dims[l + 1], in = dims[l];
    Vec z(out);
    for (int i = 0; i < out; ++i) {
      double s = 0.0;
      for (int j = 0; j < in; ++j) s += params.theta[off + static_cast<std::size_t>(i) * in + j] * a[j];
      z[i] = s;
    }
    off += static_cast<std::size_t>(out) * in;
    for (int i = 0; i < out; ++i) z[i] += params.theta[off + i];
    off += out;
    if (tape) tape->pre.push_back(z);
    if (l + 1 < layers)
      for (int i = 0; i < out; ++i) z[i] = act_value(spec.activation, z[i]);
    a = std::move(z);
    if (tape) tape->acts.push_back(a);
  }
  return a;
}
}  // namespace

Vec mlp_forward(const MlpSpec& spec, const ModelParams& params, const Vec& input) {
  return mlp_run(spec, params, input, nullptr);
}

Vec mlp_vjp_params(const MlpSpec& spec, const ModelParams& params, const Vec& input,
                   const Vec& cotangent, Vec* input_cotangent) {
  if (static_cast<int>(cotangent.size()) != spec.output_dim)
    throw std::invalid_argument("mlp_vjp_params: cotangent length does not match output dim");
  MlpTape tape;
  mlp_run(spec, params, input, &tape);

  const std::vector<int> dims = mlp_dims(spec);
  const int layers = static_cast<int>(dims.size()) - 1;
  Vec grad(params.theta.size(), 0.0);

  // offsets of each layer's W block
  std::vector<std::size_t> w_off(layers);
  std::size_t off = 0;
  for (int l = 0; l < layers; ++l) {
    w_off[l] = off;
    off += static_cast<std::size_t>(dims[l + 1]) * dims[l] + dims[l + 1];
  }

  Vec delta = cotangent;  // output layer is linear
  for (int l = layers - 1; l >= 0; --l) {
    const int out = dims[l + 1], in = dims[l];
    const Vec& a_prev = tape.acts[l];
    for (int i = 0; i < out; ++i) {
      const std::size_t row = w_off[l] + static_cast<std::size_t>(i) * in;
      for (int j = 0; j < in; ++j) grad[row + j] += delta[i] * a_prev[j];
      grad[w_off[l] + static_cast<std::size_t>(out) * in + i] += delta[i];
    }
    Vec delta_prev(in, 0.0);
    for (int i = 0; i < out; ++i) {
      const std::size_t row = w_off[l] + static_cast<std::size_t>(i) * in;
      for (int j = 0; j < in; ++j) delta_prev[j] += params.theta[row + j] * delta[i];
    }
    if (l == 0) {
      if (input_cotangent) *input_cotangent = std::move(delta_prev);
      break;
    }
    for (int j = 0; j < in; ++j)
      delta_prev[j] *= act_deriv(spec.activation, tape.pre[l - 1][j]);
    delta = std::move(delta_prev);
  }
  return grad;
}

// ===========================================================================
// Learned-initialization gradient descent
// ===========================================================================

std::pair<DomainPoint, IterateTrace> learned_init_gd_forward(const LearnedInitGdSpec& spec,
                                                             const ModelParams& params,
                                                             const ProblemFamily& family,
                                                             const ContextVector& x) {
  if (static_cast<int>(params.theta.size()) != family.n)
    throw std::invalid_argument("learned_init_gd_forward: params length must equal n");
  IterateTrace trace;
  DomainPoint y = params.theta;
  trace.iterates.push_back(y);
  for (int t = 1; t <= spec.K; ++t) {
    Vec g = family.grad_y(y, x);
    for (double v : g)
      if (!std::isfinite(v))
        throw std::runtime_error("learned_init_gd_forward: non-finite gradient at step " +
                                 std::to_string(t));
    trace.step_grads.push_back(g);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= spec.alpha * g[i];
    trace.iterates.push_back(y);
  }
  return {y, trace};
}

Matrix learned_init_gd_jacobian(const LearnedInitGdSpec& spec, const ModelParams& params,
                                const ProblemFamily& family, const ContextVector& x) {
  const auto [y_final, trace] = learned_init_gd_forward(spec, params, family, x);
  (void)y_final;
  const int n = family.n;
  Matrix d = Matrix::identity(n);
  for (int k = 0; k < spec.K; ++k) {
    // D <- (I - alpha H(y^k)) D, column by column
    Matrix next(n, n);
    for (int j = 0; j < n; ++j) {
      Vec col(n);
      for (int i = 0; i < n; ++i) col[i] = d(i, j);
      const Vec hcol = family.hvp_y(trace.iterates[k], x, col);
      for (int i = 0; i < n; ++i) next(i, j) = col[i] - spec.alpha * hcol[i];
    }
    d = std::move(next);
  }
  return d;
}

Matrix learned_init_gd_jacobian_fo(const LearnedInitGdSpec&, const ProblemFamily& family) {
  return Matrix::identity(family.n);
}

// ===========================================================================
// Structured learned-update descent: per-step log step sizes and momentum
// gates, the toolkit's stand-in for a recurrent learned optimizer.
// ===========================================================================

namespace {
std::vector<std::pair<std::string, std::vector<int>>> learned_step_layout(int K, int n) {
  return {{"y0", {n}}, {"log_step", {K, n}}, {"momentum_gate", {K, n}}};
}
}  // namespace

std::pair<DomainPoint, IterateTrace> learned_step_gd_forward(const LearnedStepGdSpec& spec,
                                                             const ModelParams& params,
                                                             const ProblemFamily& family,
                                                             const ContextVector& x) {
  const int n = family.n, K = spec.K;
  if (static_cast<int>(params.theta.size()) != n + 2 * K * n)
    throw std::invalid_argument("learned_step_gd_forward: params length must be n + 2*K*n");
  const double* y0 = params.theta.data();
  const double* s = params.theta.data() + n;
  const double* m = params.theta.data() + n + static_cast<std::size_t>(K) * n;

  IterateTrace trace;
  DomainPoint y(y0, y0 + n);
  DomainPoint y_prev = y;  // virtual y^{-1} := y^0
  trace.iterates.push_back(y);
  for (int t = 0; t < K; ++t) {
    Vec g = family.grad_y(y, x);
    trace.step_grads.push_back(g);
    DomainPoint y_next(n);
    for (int i = 0; i < n; ++i) {
      const double step = std::exp(s[static_cast<std::size_t>(t) * n + i]);
      const double gate = std::tanh(m[static_cast<std::size_t>(t) * n + i]);
      y_next[i] = y[i] - step * g[i] + gate * (y[i] - y_prev[i]);
      if (!std::isfinite(y_next[i]))
        throw std::runtime_error("learned_step_gd_forward: non-finite update at step " +
                                 std::to_string(t + 1));
    }
    y_prev = std::move(y);
    y = std::move(y_next);
    trace.iterates.push_back(y);
  }
  return {y, trace};
}

// ===========================================================================
// LISTA
// ===========================================================================

namespace {
std::vector<std::pair<std::string, std::vector<int>>> lista_layout(const ListaSpec& spec) {
  return {{"F", {spec.code_dim, spec.signal_dim}},
          {"G", {spec.code_dim, spec.code_dim}},
          {"beta", {1}}};
}

struct ListaView {
  Matrix f;
  Matrix g;
  double beta;
};

ListaView lista_view(const ListaSpec& spec, const ModelParams& params) {
  const int n = spec.code_dim, m = spec.signal_dim;
  if (static_cast<int>(params.theta.size()) != n * m + n * n + 1)
    throw std::invalid_argument("lista: params length does not match spec");
  ListaView v;
  v.f = Matrix(n, m);
  std::copy(params.theta.begin(), params.theta.begin() + static_cast<std::size_t>(n) * m,
            v.f.data.begin());
  v.g = Matrix(n, n);
  std::copy(params.theta.begin() + static_cast<std::size_t>(n) * m,
            params.theta.begin() + static_cast<std::size_t>(n) * m + static_cast<std::size_t>(n) * n,
            v.g.data.begin());
  // guard against a training step pushing the threshold negative
  v.beta = std::max(params.theta.back(), 0.0);
  return v;
}
}  // namespace

std::pair<DomainPoint, IterateTrace> lista_forward(const ListaSpec& spec,
                                                   const ModelParams& params,
                                                   const ContextVector& x) {
  if (static_cast<int>(x.data.size()) != spec.signal_dim)
    throw std::invalid_argument("lista_forward: signal length does not match spec");
  const ListaView v = lista_view(spec, params);
  IterateTrace trace;
  DomainPoint y(spec.code_dim, 0.0);
  trace.iterates.push_back(y);
  for (int t = 0; t < spec.K; ++t) {
    y = ista_like_step(v.f, v.g, v.beta, x.data, y);
    trace.iterates.push_back(y);
  }
  return {y, trace};
}

// ===========================================================================
// AmortModel adapters
// ===========================================================================

namespace {

class IdentityModel final : public AmortModel {
 public:
  explicit IdentityModel(int n) : n_(n) {}
  const char* kind() const override { return "identity"; }
  int param_count() const override { return n_; }
  std::vector<std::pair<std::string, std::vector<int>>> param_layout() const override {
    return {{"y", {n_}}};
  }
  ModelParams init_params(Rng&) const override {
    return {Vec(n_, 0.0), param_layout()};
  }
  int num_iterates() const override { return 1; }
  DomainPoint forward(const ModelParams& p, const ProblemFamily&, const ContextVector&,
                      IterateTrace* trace) const override {
    if (trace) trace->iterates = {p.theta};
    return p.theta;
  }
  Vec vjp_params(const ModelParams&, const ProblemFamily&, const ContextVector&,
                 const std::vector<Vec>& cots, int) const override {
    return cots.back();
  }

 private:
  int n_;
};

class MlpModel final : public AmortModel {
 public:
  explicit MlpModel(MlpSpec spec) : spec_(std::move(spec)) {}
  const char* kind() const override { return "mlp"; }
  int param_count() const override { return layout_size(mlp_param_layout(spec_)); }
  std::vector<std::pair<std::string, std::vector<int>>> param_layout() const override {
    return mlp_param_layout(spec_);
  }
  ModelParams init_params(Rng& rng) const override { return mlp_init_params(spec_, rng); }
  int num_iterates() const override { return 1; }
  DomainPoint forward(const ModelParams& p, const ProblemFamily&, const ContextVector& x,
                      IterateTrace* trace) const override {
    DomainPoint y = mlp_forward(spec_, p, x.data);
    if (trace) trace->iterates = {y};
    return y;
  }
  Vec vjp_params(const ModelParams& p, const ProblemFamily&, const ContextVector& x,
                 const std::vector<Vec>& cots, int) const override {
    return mlp_vjp_params(spec_, p, x.data, cots.back());
  }
  const MlpSpec& spec() const { return spec_; }

 private:
  MlpSpec spec_;
};

class OracleModel final : public AmortModel {
 public:
  const char* kind() const override { return "oracle"; }
  int param_count() const override { return 0; }
  std::vector<std::pair<std::string, std::vector<int>>> param_layout() const override {
    return {};
  }
  ModelParams init_params(Rng&) const override { return {}; }
  int num_iterates() const override { return 1; }
  DomainPoint forward(const ModelParams&, const ProblemFamily& fam, const ContextVector& x,
                      IterateTrace* trace) const override {
    if (!fam.has_oracle())
      throw std::runtime_error("oracle model: family '" + fam.name + "' has no oracle");
    DomainPoint y = fam.oracle(x);
    if (trace) trace->iterates = {y};
    return y;
  }
  bool supports_vjp() const override { return false; }
  Vec vjp_params(const ModelParams&, const ProblemFamily&, const ContextVector&,
                 const std::vector<Vec>&, int) const override {
    throw std::runtime_error("oracle model has no parameters to differentiate");
  }
};

class LearnedInitGdModel final : public AmortModel {
 public:
  LearnedInitGdModel(LearnedInitGdSpec spec, int n) : spec_(spec), n_(n) {}
  const char* kind() const override { return "learned_init"; }
  int param_count() const override { return n_; }
  std::vector<std::pair<std::string, std::vector<int>>> param_layout() const override {
    return {{"y0", {n_}}};
  }
  ModelParams init_params(Rng& rng) const override {
    ModelParams p{Vec(n_), param_layout()};
    for (int i = 0; i < n_; ++i) p.theta[i] = 0.1 * rng.normal();
    return p;
  }
  int num_iterates() const override { return spec_.K + 1; }
  DomainPoint forward(const ModelParams& p, const ProblemFamily& fam, const ContextVector& x,
                      IterateTrace* trace) const override {
    auto [y, tr] = learned_init_gd_forward(spec_, p, fam, x);
    if (trace) *trace = std::move(tr);
    return y;
  }
  bool supports_truncation() const override { return true; }
  Vec vjp_params(const ModelParams& p, const ProblemFamily& fam, const ContextVector& x,
                 const std::vector<Vec>& cots, int truncation_start) const override {
    auto [y, trace] = learned_init_gd_forward(spec_, p, fam, x);
    (void)y;
    const int K = spec_.K;
    const int ts = truncation_start;
    Vec lam = cots[K].empty() ? Vec(n_, 0.0) : cots[K];
    for (int t = K; t > ts; --t) {
      // lam <- (I - alpha H(y^{t-1})) lam, then pick up the loss on y^{t-1}
      const Vec h = fam.hvp_y(trace.iterates[t - 1], x, lam);
      for (int i = 0; i < n_; ++i) lam[i] -= spec_.alpha * h[i];
      if (t - 1 > ts && !cots[t - 1].empty())
        for (int i = 0; i < n_; ++i) lam[i] += cots[t - 1][i];
    }
    // everything at or below the truncation boundary pulls back as identity
    for (int t = 0; t <= ts; ++t)
      if (!cots[t].empty())
        for (int i = 0; i < n_; ++i) lam[i] += cots[t][i];
    return lam;
  }
  const LearnedInitGdSpec& spec() const { return spec_; }

 private:
  LearnedInitGdSpec spec_;
  int n_;
};

class LearnedStepGdModel final : public AmortModel {
 public:
  LearnedStepGdModel(LearnedStepGdSpec spec, int n) : spec_(spec), n_(n) {}
  const char* kind() const override { return "learned_step"; }
  int param_count() const override { return n_ + 2 * spec_.K * n_; }
  std::vector<std::pair<std::string, std::vector<int>>> param_layout() const override {
    return learned_step_layout(spec_.K, n_);
  }
  ModelParams init_params(Rng& rng) const override {
    ModelParams p{Vec(param_count(), 0.0), param_layout()};
    for (int i = 0; i < n_; ++i) p.theta[i] = 0.1 * rng.normal();
    // log step sizes start at log(0.1)
    for (int i = 0; i < spec_.K * n_; ++i) p.theta[n_ + i] = std::log(0.1);
    return p;
  }
  int num_iterates() const override { return spec_.K + 1; }
  DomainPoint forward(const ModelParams& p, const ProblemFamily& fam, const ContextVector& x,
                      IterateTrace* trace) const override {
    auto [y, tr] = learned_step_gd_forward(spec_, p, fam, x);
    if (trace) *trace = std::move(tr);
    return y;
  }
  bool supports_truncation() const override { return true; }
  Vec vjp_params(const ModelParams& p, const ProblemFamily& fam, const ContextVector& x,
                 const std::vector<Vec>& cots, int truncation_start) const override {
    auto [y_out, trace] = learned_step_gd_forward(spec_, p, fam, x);
    (void)y_out;
    const int K = spec_.K, n = n_, ts = truncation_start;
    const double* s = p.theta.data() + n;
    const double* m = p.theta.data() + n + static_cast<std::size_t>(K) * n;

    Vec grad(param_count(), 0.0);
    // lam[t] = dL/dy^t, filled backwards
    std::vector<Vec> lam(K + 1, Vec(n, 0.0));
    for (int t = 0; t <= K; ++t)
      if (t < static_cast<int>(cots.size()) && !cots[t].empty()) lam[t] = cots[t];

    for (int t = K; t > ts; --t) {
      const Vec& l = lam[t];
      const Vec& y_prev = trace.iterates[t - 1];
      const Vec& y_prev2 = trace.iterates[t >= 2 ? t - 2 : 0];
      const Vec& g = trace.step_grads[t - 1];
      Vec expl(n);
      for (int i = 0; i < n; ++i) {
        const std::size_t idx = static_cast<std::size_t>(t - 1) * n + i;
        const double step = std::exp(s[idx]);
        const double th = std::tanh(m[idx]);
        grad[n + idx] += -step * g[i] * l[i];
        grad[n + static_cast<std::size_t>(K) * n + idx] +=
            (1.0 - th * th) * (y_prev[i] - y_prev2[i]) * l[i];
        expl[i] = step * l[i];
        lam[t - 1][i] += l[i] + th * l[i];
        if (t >= 2)
          lam[t - 2][i] -= th * l[i];
        else
          lam[0][i] -= th * l[i];  // y^{-1} aliases y^0
      }
      const Vec h = fam.hvp_y(y_prev, x, expl);
      for (int i = 0; i < n; ++i) lam[t - 1][i] -= h[i];
    }
    // y0 block: the surviving cotangent at the boundary plus identity
    // pull-backs of any earlier per-iterate losses
    for (int i = 0; i < n; ++i) grad[i] = lam[ts][i];
    for (int t = 0; t < ts; ++t)
      if (t < static_cast<int>(cots.size()) && !cots[t].empty())
        for (int i = 0; i < n; ++i) grad[i] += cots[t][i];
    return grad;
  }

 private:
  LearnedStepGdSpec spec_;
  int n_;
};

class ListaModel final : public AmortModel {
 public:
  ListaModel(int K, const SparseCodingFamilyConfig& cfg)
      : spec_{K, cfg.W_d.rows, cfg.W_d.cols} {
    init_.layout = lista_layout(spec_);
    init_.theta = cfg.W_e.data;
    init_.theta.insert(init_.theta.end(), cfg.S.data.begin(), cfg.S.data.end());
    init_.theta.push_back(cfg.beta);
  }
  const char* kind() const override { return "lista"; }
  int param_count() const override { return static_cast<int>(init_.theta.size()); }
  std::vector<std::pair<std::string, std::vector<int>>> param_layout() const override {
    return init_.layout;
  }
  ModelParams init_params(Rng&) const override { return init_; }
  int num_iterates() const override { return spec_.K + 1; }
  DomainPoint forward(const ModelParams& p, const ProblemFamily&, const ContextVector& x,
                      IterateTrace* trace) const override {
    auto [y, tr] = lista_forward(spec_, p, x);
    if (trace) *trace = std::move(tr);
    return y;
  }
  Vec vjp_params(const ModelParams& p, const ProblemFamily&, const ContextVector& x,
                 const std::vector<Vec>& cots, int truncation_start) const override {
    if (truncation_start != 0)
      throw std::invalid_argument("lista: truncated unrolling is not defined for this model");
    const ListaView v = lista_view(spec_, p);
    const int K = spec_.K, n = spec_.code_dim, m = spec_.signal_dim;
    const bool beta_active = p.theta.back() > 0.0;

    // replay forward keeping pre-activations
    std::vector<Vec> iterates{Vec(n, 0.0)};
    std::vector<Vec> pres;
    for (int t = 0; t < K; ++t) {
      Vec pre = matvec(v.f, x.data);
      const Vec gy = matvec(v.g, iterates.back());
      for (int i = 0; i < n; ++i) pre[i] += gy[i];
      pres.push_back(pre);
      iterates.push_back(soft_threshold(pre, v.beta));
    }

    Vec grad(p.theta.size(), 0.0);
    double* df = grad.data();
    double* dg = grad.data() + static_cast<std::size_t>(n) * m;
    double& dbeta = grad.back();

    Vec lam(n, 0.0);
    if (!cots[K].empty()) lam = cots[K];
    for (int t = K; t >= 1; --t) {
      const Vec& pre = pres[t - 1];
      Vec dv(n);
      for (int i = 0; i < n; ++i) {
        // subgradient 0 at the kink |pre| == beta
        const bool active = std::abs(pre[i]) > v.beta;
        dv[i] = active ? lam[i] : 0.0;
        if (active && beta_active) dbeta -= (pre[i] > 0.0 ? 1.0 : -1.0) * dv[i];
      }
      const Vec& y_prev = iterates[t - 1];
      for (int i = 0; i < n; ++i) {
        if (dv[i] == 0.0) continue;
        for (int j = 0; j < m; ++j) df[static_cast<std::size_t>(i) * m + j] += dv[i] * x.data[j];
        for (int j = 0; j < n; ++j) dg[static_cast<std::size_t>(i) * n + j] += dv[i] * y_prev[j];
      }
      lam = matvec_t(v.g, dv);
      if (t - 1 >= 1 && !cots[t - 1].empty()) axpy(1.0, cots[t - 1], lam);
    }
    return grad;
  }
  const ListaSpec& spec() const { return spec_; }

 private:
  ListaSpec spec_;
  ModelParams init_;
};

}  // namespace

std::unique_ptr<AmortModel> make_mlp_model(const MlpSpec& spec) {
  return std::make_unique<MlpModel>(spec);
}
std::unique_ptr<AmortModel> make_identity_model(int n) {
  return std::make_unique<IdentityModel>(n);
}
std::unique_ptr<AmortModel> make_oracle_model() { return std::make_unique<OracleModel>(); }
std::unique_ptr<AmortModel> make_learned_init_gd_model(const LearnedInitGdSpec& spec, int n) {
  return std::make_unique<LearnedInitGdModel>(spec, n);
}
std::unique_ptr<AmortModel> make_learned_step_gd_model(const LearnedStepGdSpec& spec, int n) {
  return std::make_unique<LearnedStepGdModel>(spec, n);
}
std::unique_ptr<AmortModel> make_lista_model(int K, const SparseCodingFamilyConfig& cfg) {
  return std::make_unique<ListaModel>(K, cfg);
}

}  // namespace amort
