#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "amort/core.hpp"
#include "amort/objectives.hpp"
#include "amort/parallel.hpp"

using namespace amort;

TEST_CASE("same seed gives the same stream, different seeds differ") {
  Rng a = seed_rng(0), b = seed_rng(0);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c = seed_rng(0), d = seed_rng(1);
  bool any_diff = false;
  for (int i = 0; i < 10; ++i) any_diff |= (c.next_u64() != d.next_u64());
  CHECK(any_diff);
}

TEST_CASE("normal draws have sane moments") {
  Rng rng(42);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    sum += v;
    sq += v * v;
  }
  CHECK(std::abs(sum / n) < 0.02);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("sample_contexts respects count, dimensions and determinism") {
  const ProblemFamily fam = make_quadratic_family(4, 0.1, 1.0);
  Rng rng(5);
  const auto ctxs = sample_contexts(fam, rng, 3);
  CHECK(ctxs.size() == 3);
  for (const auto& c : ctxs) CHECK(static_cast<int>(c.data.size()) == fam.ctx_dim);

  Rng rng2(5);
  const auto again = sample_contexts(fam, rng2, 3);
  for (int i = 0; i < 3; ++i)
    CHECK(std::memcmp(ctxs[i].data.data(), again[i].data.data(),
                      ctxs[i].data.size() * sizeof(double)) == 0);
  CHECK_THROWS(sample_contexts(fam, rng, 0));
}

TEST_CASE("sphere samples lie on the unit sphere") {
  const ProblemFamily fam = make_sphere_family({});
  Rng rng(9);
  const auto ctxs = sample_contexts(fam, rng, 20);
  const int m = 4;
  for (const auto& c : ctxs)
    for (int i = 0; i < m; ++i) {
      const Vec z(c.data.begin() + 3 * i, c.data.begin() + 3 * i + 3);
      CHECK(std::abs(norm2(z) - 1.0) <= 1e-12);
    }
}

TEST_CASE("amortization gap: identity case and analytic quadratic") {
  const ProblemFamily fam = make_quadratic_family(2, 0.1, 1.0);

  // predict = oracle
  Rng rng(1);
  const auto ctxs = sample_contexts(fam, rng, 8);
  const GapReport identity_rep =
      amortization_gap(fam, [&](const ContextVector& x) { return fam.oracle(x); }, ctxs);
  CHECK(identity_rep.mean_gap <= 1e-10);

  // A = I, b = (1,1), predict = 0: gap = 1/2 |b|^2 = 1
  const ContextVector fixed = pack_quadratic_ctx(Matrix::identity(2), {1.0, 1.0});
  const GapReport rep = amortization_gap(
      fam, [](const ContextVector&) { return Vec{0.0, 0.0}; }, {fixed});
  CHECK(rep.per_context[0] == doctest::Approx(1.0).epsilon(1e-12));

  ProblemFamily no_oracle = fam;
  no_oracle.oracle = nullptr;
  CHECK_THROWS_WITH_AS(
      amortization_gap(no_oracle, [](const ContextVector&) { return Vec(2, 0.0); }, ctxs),
      doctest::Contains("oracle unavailable"), std::runtime_error);
}

TEST_CASE("gap per-context values stay nonnegative for oracle families") {
  Rng rng(30);
  for (const char* which : {"quadratic", "sparse", "sphere"}) {
    ProblemFamily fam = std::string(which) == "quadratic" ? make_quadratic_family(5, 0.2, 1.5)
                        : std::string(which) == "sparse"
                            ? make_sparse_coding_family(6, 12, 0.1, 3)
                            : make_sphere_family({});
    Rng crng = rng.split();
    const auto ctxs = sample_contexts(fam, crng, 10);
    Rng prng = rng.split();
    Vec probe(fam.n);
    for (double& v : probe) v = prng.normal();
    if (fam.name == "sphere") probe = {0.3, -0.5, 0.9};
    const GapReport rep =
        amortization_gap(fam, [&](const ContextVector&) { return probe; }, ctxs);
    for (double g : rep.per_context) CHECK(g >= -1e-8);
  }
}

TEST_CASE("finite differences recover analytic gradients") {
  auto half_sq = [](const Vec& y) { return 0.5 * norm2sq(y); };
  const Vec g = finite_diff_grad(half_sq, {1.0, 2.0}, 1e-6);
  CHECK(std::abs(g[0] - 1.0) < 1e-6);
  CHECK(std::abs(g[1] - 2.0) < 1e-6);

  const Vec zero = finite_diff_grad([](const Vec&) { return 3.0; }, {1.0, 2.0, 3.0}, 1e-6);
  for (double v : zero) CHECK(std::abs(v) < 1e-9);

  CHECK_THROWS(finite_diff_grad(half_sq, {1.0}, 0.0));
  CHECK_THROWS_WITH_AS(
      finite_diff_grad([](const Vec& y) { return std::log(y[0]); }, {-1.0, 1.0}, 1e-6),
      doctest::Contains("coordinate 0"), std::runtime_error);
}

TEST_CASE("parallel and serial gap evaluation are bitwise identical") {
  const ProblemFamily fam = make_sphere_family({});
  Rng rng(77);
  const auto ctxs = sample_contexts(fam, rng, 32);
  auto predict = [](const ContextVector& x) {
    return Vec{x.data[0] + 0.1, x.data[1] - 0.2, x.data[2] + 0.4};
  };
  set_parallel_enabled(true);
  const GapReport par = amortization_gap(fam, predict, ctxs);
  set_parallel_enabled(false);
  const GapReport ser = amortization_gap(fam, predict, ctxs);
  set_parallel_enabled(true);
  CHECK(std::memcmp(par.per_context.data(), ser.per_context.data(),
                    par.per_context.size() * sizeof(double)) == 0);
  CHECK(par.mean_gap == ser.mean_gap);
}
