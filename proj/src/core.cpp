#include "amort/core.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "amort/parallel.hpp"

namespace amort {

namespace {
std::atomic<bool> g_parallel{true};

std::uint64_t splitmix64_next(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel_enabled(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

int worker_count() {
#ifdef _OPENMP
  return parallel_enabled() ? omp_get_max_threads() : 1;
#else
  return 1;
#endif
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) s = splitmix64_next(x);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u clamped away from 0 so log stays finite.
  double u = uniform();
  if (u < 1e-300) u = 1e-300;
  const double v = uniform();
  const double r = std::sqrt(-2.0 * std::log(u));
  const double theta = 6.283185307179586476925286766559 * v;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Vec Rng::normal_vec(int n) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = normal();
  return v;
}

Rng Rng::split() { return Rng(next_u64()); }

Rng seed_rng(std::uint64_t seed) { return Rng(seed); }

std::vector<ContextVector> sample_contexts(const ProblemFamily& family, Rng& rng, int count) {
  if (count < 1) throw std::invalid_argument("sample_contexts: count must be >= 1");
  std::vector<ContextVector> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    ContextVector x = family.sample(rng);
    check_finite(x.data, "sampled context");
    if (static_cast<int>(x.data.size()) != family.ctx_dim)
      throw std::runtime_error("sample_contexts: context length does not match family ctx_dim");
    out.push_back(std::move(x));
  }
  return out;
}

double stationarity_residual(const ProblemFamily& family, const DomainPoint& y,
                             const ContextVector& x) {
  if (family.stationarity) return family.stationarity(y, x);
  return norm2(family.grad_y(y, x));
}

GapReport amortization_gap_with_ref(const ProblemFamily& family,
                                    const std::function<DomainPoint(const ContextVector&)>& predict,
                                    const std::vector<ContextVector>& contexts,
                                    const Vec& oracle_values) {
  GapReport rep;
  const std::size_t n = contexts.size();
  rep.per_context.assign(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    const DomainPoint pred = predict(contexts[i]);
    rep.per_context[i] = family.eval(pred, contexts[i]) - oracle_values[i];
  });
  if (n == 0) return rep;
  double sum = 0.0, mx = rep.per_context[0];
  for (double g : rep.per_context) {
    sum += g;
    if (g > mx) mx = g;
  }
  rep.mean_gap = sum / static_cast<double>(n);
  rep.max_gap = mx;
  return rep;
}

GapReport amortization_gap(const ProblemFamily& family,
                           const std::function<DomainPoint(const ContextVector&)>& predict,
                           const std::vector<ContextVector>& contexts) {
  if (!family.has_oracle())
    throw std::runtime_error("amortization_gap: oracle unavailable for family '" + family.name +
                             "'");
  Vec ref(contexts.size(), 0.0);
  parallel_for(contexts.size(), [&](std::size_t i) {
    ref[i] = family.eval(family.oracle(contexts[i]), contexts[i]);
  });
  return amortization_gap_with_ref(family, predict, contexts, ref);
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& fn, const Vec& point, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: h must be > 0");
  Vec g(point.size());
  Vec p = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    p[i] = point[i] + h;
    const double fp = fn(p);
    p[i] = point[i] - h;
    const double fm = fn(p);
    p[i] = point[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("finite_diff_grad: non-finite value at coordinate " +
                               std::to_string(i));
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Vec finite_diff_jvp(const std::function<Vec(const Vec&)>& fn, const Vec& point, const Vec& dir,
                    double h) {
  Vec pp = point, pm = point;
  axpy(h, dir, pp);
  axpy(-h, dir, pm);
  const Vec fp = fn(pp);
  const Vec fm = fn(pm);
  Vec out(fp.size());
  for (std::size_t i = 0; i < fp.size(); ++i) out[i] = (fp[i] - fm[i]) / (2.0 * h);
  return out;
}

double rel_error(const Vec& a, const Vec& b) {
  double scale = 1.0;
  for (double v : b) scale = std::max(scale, std::abs(v));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m / scale;
}

void check_finite(const Vec& v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]))
      throw std::runtime_error(std::string("non-finite entry in ") + what + " at index " +
                               std::to_string(i));
}

}  // namespace amort
