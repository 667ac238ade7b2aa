#pragma once

#include <memory>

#include "amort/core.hpp"
#include "amort/objectives.hpp"

namespace amort {

// Flat parameter vector plus named shapes; the unit of checkpointing and of
// all outer-loop gradients.
struct ModelParams {
  Vec theta;
  std::vector<std::pair<std::string, std::vector<int>>> layout;
};

int layout_size(const std::vector<std::pair<std::string, std::vector<int>>>& layout);
void validate_params(const ModelParams& params);

enum class Activation { tanh_act, relu_act, softplus_act };
Activation activation_from_name(const std::string& name);
const char* activation_name(Activation a);

struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int output_dim = 0;
  Activation activation = Activation::tanh_act;
};

// Ordered record of semi-amortized iterates y^0..y^K.
struct IterateTrace {
  std::vector<DomainPoint> iterates;
  std::vector<Vec> step_grads;   // objective gradients per step, when the model queries them
  Vec residual_norms;            // |R(y^t)| for fixed-point solves
  std::vector<Vec> alphas;       // mixing coefficients per step (Anderson-style solvers)
};

// --- MLP primitives ---------------------------------------------------------
std::vector<std::pair<std::string, std::vector<int>>> mlp_param_layout(const MlpSpec& spec);
ModelParams mlp_init_params(const MlpSpec& spec, Rng& rng);
Vec mlp_forward(const MlpSpec& spec, const ModelParams& params, const Vec& input);
// D_theta[y]^T cotangent by a hand-derived backward pass. When
// `input_cotangent` is non-null it also receives D_x[y]^T cotangent.
Vec mlp_vjp_params(const MlpSpec& spec, const ModelParams& params, const Vec& input,
                   const Vec& cotangent, Vec* input_cotangent = nullptr);

// --- gradient-descent models -----------------------------------------------
struct LearnedInitGdSpec {
  int K = 1;
  double alpha = 0.1;
};

struct LearnedStepGdSpec {
  int K = 1;
};

struct ListaSpec {
  int K = 1;
  int signal_dim = 0;  // m
  int code_dim = 0;    // n
};

std::pair<DomainPoint, IterateTrace> learned_init_gd_forward(const LearnedInitGdSpec& spec,
                                                             const ModelParams& params,
                                                             const ProblemFamily& family,
                                                             const ContextVector& x);
// Exact unrolled Jacobian: ordered product of (I - alpha H(y^k)) factors,
// newest step applied on the left, materialized via n HVPs per step.
Matrix learned_init_gd_jacobian(const LearnedInitGdSpec& spec, const ModelParams& params,
                                const ProblemFamily& family, const ContextVector& x);
// First-order approximation: the identity.
Matrix learned_init_gd_jacobian_fo(const LearnedInitGdSpec& spec, const ProblemFamily& family);

std::pair<DomainPoint, IterateTrace> learned_step_gd_forward(const LearnedStepGdSpec& spec,
                                                             const ModelParams& params,
                                                             const ProblemFamily& family,
                                                             const ContextVector& x);

std::pair<DomainPoint, IterateTrace> lista_forward(const ListaSpec& spec,
                                                   const ModelParams& params,
                                                   const ContextVector& x);

// --- model interface for the learning loop ----------------------------------
class AmortModel {
 public:
  virtual ~AmortModel() = default;
  virtual const char* kind() const = 0;
  virtual int param_count() const = 0;
  virtual std::vector<std::pair<std::string, std::vector<int>>> param_layout() const = 0;
  virtual ModelParams init_params(Rng& rng) const = 0;
  virtual int num_iterates() const = 0;  // trace length K+1
  virtual DomainPoint forward(const ModelParams& params, const ProblemFamily& family,
                              const ContextVector& x, IterateTrace* trace = nullptr) const = 0;
  virtual bool supports_vjp() const { return true; }
  // sum_i D_theta[y^i]^T cot_i. truncation_start > 0 identity-replaces the
  // unrolled factors below that iterate (TBPTT); supported only by models
  // whose initial iterate is a parameter block.
  virtual Vec vjp_params(const ModelParams& params, const ProblemFamily& family,
                         const ContextVector& x, const std::vector<Vec>& iterate_cotangents,
                         int truncation_start = 0) const = 0;
  virtual bool supports_truncation() const { return false; }
};

std::unique_ptr<AmortModel> make_mlp_model(const MlpSpec& spec);
std::unique_ptr<AmortModel> make_identity_model(int n);
std::unique_ptr<AmortModel> make_oracle_model();
std::unique_ptr<AmortModel> make_learned_init_gd_model(const LearnedInitGdSpec& spec, int n);
std::unique_ptr<AmortModel> make_learned_step_gd_model(const LearnedStepGdSpec& spec, int n);
// LISTA initialized at the ISTA weights of `cfg`.
std::unique_ptr<AmortModel> make_lista_model(int K, const SparseCodingFamilyConfig& cfg);

}  // namespace amort
