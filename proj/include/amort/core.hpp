#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "amort/linalg.hpp"

namespace amort {

// Deterministic xoshiro256++ stream seeded through splitmix64. Same seed,
// same stream; split() derives an independent stream for parallel work.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "xoshiro256++";

  explicit Rng(std::uint64_t seed);
  std::uint64_t next_u64();
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);
  double normal();                         // N(0, 1), Box-Muller
  Vec normal_vec(int n);
  Rng split();

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

Rng seed_rng(std::uint64_t seed);

// The context x of one optimization instance, flattened to doubles. The
// owning family documents the layout of `data`.
struct ContextVector {
  Vec data;
  std::string family_tag;
};

// An iterate / solution y in R^n.
using DomainPoint = Vec;

// One amortization instance: objective, derivatives, context sampler and an
// optional oracle solver. Immutable after construction and safe to share
// across threads; samplers need exclusive access to their Rng.
struct ProblemFamily {
  std::string name;
  int n = 0;        // domain dimension
  int ctx_dim = 0;  // context dimension

  std::function<double(const DomainPoint&, const ContextVector&)> eval;
  std::function<DomainPoint(const DomainPoint&, const ContextVector&)> grad_y;
  std::function<DomainPoint(const DomainPoint&, const ContextVector&, const Vec&)> hvp_y;
  std::function<ContextVector(Rng&)> sample;
  std::function<DomainPoint(const ContextVector&)> oracle;  // empty when unavailable

  // First-order optimality residual at (y, x); defaults to |grad_y| for
  // smooth objectives. Composite/nonsmooth families override it with the
  // matching condition (prox fixed-point residual, subdifferential test).
  std::function<double(const DomainPoint&, const ContextVector&)> stationarity;

  // Context-side derivatives for the sensitivity operators.
  std::function<Vec(const DomainPoint&, const ContextVector&)> grad_x;
  // D_x grad_y f, an n x ctx_dim matrix.
  std::function<Matrix(const DomainPoint&, const ContextVector&)> cross_jacobian;

  // Family-private configuration, retrievable through the factory's accessor.
  std::shared_ptr<const void> impl;

  bool has_oracle() const { return static_cast<bool>(oracle); }
};

struct GapReport {
  double mean_gap = 0.0;
  double max_gap = 0.0;
  Vec per_context;
};

std::vector<ContextVector> sample_contexts(const ProblemFamily& family, Rng& rng, int count);

double stationarity_residual(const ProblemFamily& family, const DomainPoint& y,
                             const ContextVector& x);

// Suboptimality f(predict(x); x) - f(oracle(x); x) per context. `predict`
// must be a pure function; contexts are evaluated concurrently.
GapReport amortization_gap(const ProblemFamily& family,
                           const std::function<DomainPoint(const ContextVector&)>& predict,
                           const std::vector<ContextVector>& contexts);
// Same, with oracle objective values precomputed by the caller.
GapReport amortization_gap_with_ref(const ProblemFamily& family,
                                    const std::function<DomainPoint(const ContextVector&)>& predict,
                                    const std::vector<ContextVector>& contexts,
                                    const Vec& oracle_values);

// Central finite differences, the test oracle behind every gradient claim.
Vec finite_diff_grad(const std::function<double(const Vec&)>& fn, const Vec& point, double h);
// Central-difference directional derivative of a vector-valued map.
Vec finite_diff_jvp(const std::function<Vec(const Vec&)>& fn, const Vec& point, const Vec& dir,
                    double h);

// max_i |a_i - b_i| / max(1, |b|_inf); the relative-error metric used by all
// finite-difference checks.
double rel_error(const Vec& a, const Vec& b);

void check_finite(const Vec& v, const char* what);

}  // namespace amort
