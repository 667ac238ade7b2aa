#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "amort/projections.hpp"

using namespace amort;

namespace {

Vec symmetrized(Vec flat) {
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(flat.size()))));
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < i; ++j) {
      const double m = 0.5 * (flat[i * k + j] + flat[j * k + i]);
      flat[i * k + j] = m;
      flat[j * k + i] = m;
    }
  return flat;
}

Vec random_input(ProjectionKind kind, Rng& rng) {
  switch (kind) {
    case ProjectionKind::soc: return rng.normal_vec(5);
    case ProjectionKind::psd: {
      Matrix a(4, 4);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j <= i; ++j) {
          const double v = rng.normal();
          a(i, j) = v;
          a(j, i) = v;
        }
      return a.data;
    }
    case ProjectionKind::sphere: {
      Vec v = rng.normal_vec(3);
      while (norm2(v) < 0.3) v = rng.normal_vec(3);
      return v;
    }
    default: return rng.normal_vec(6);
  }
}

double jvp_fd_error(ProjectionKind kind, const Vec& x, const Vec& dir) {
  const JvpResult jvp = proj_jvp(kind, x, dir);
  const Vec fd =
      finite_diff_jvp([&](const Vec& p) { return project(kind, p); }, x, dir, 1e-6);
  return rel_error(jvp.tangent, fd);
}

}  // namespace

TEST_CASE("relu projection: formula, idempotency, numeric oracle") {
  const Vec y = proj_relu({-1.0, 3.0});
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 3.0);
  const Vec pos{0.5, 2.0, 0.1};
  CHECK(max_abs_diff(proj_relu(pos), pos) == 0.0);

  const NumericProjResult oracle = proj_numeric_oracle(ProjectionKind::relu_orthant,
                                                       {-1.0, 3.0}, 1e-10);
  CHECK(oracle.converged);
  CHECK(max_abs_diff(oracle.y, y) <= 1e-8);
}

TEST_CASE("sigmoid projection: values and entropy-oracle agreement") {
  CHECK(proj_sigmoid({0.0})[0] == doctest::Approx(0.5));
  CHECK(proj_sigmoid({20.0})[0] > 1.0 - 1e-6);
  const NumericProjResult oracle =
      proj_numeric_oracle(ProjectionKind::sigmoid_cube, {2.0}, 1e-9);
  CHECK(std::abs(oracle.y[0] - 1.0 / (1.0 + std::exp(-2.0))) <= 1e-6);
}

TEST_CASE("softargmax projection: simplex membership and shift invariance") {
  const Vec p = proj_softargmax({0.0, 0.0});
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));

  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const Vec x = rng.normal_vec(5);
    const Vec q = proj_softargmax(x);
    double s = 0.0;
    for (double v : q) {
      CHECK(v > 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
    Vec shifted = x;
    for (double& v : shifted) v += 3.7;
    CHECK(max_abs_diff(proj_softargmax(shifted), q) <= 1e-12);
  }

  const NumericProjResult oracle =
      proj_numeric_oracle(ProjectionKind::softargmax_simplex, {1.0, 2.0, 3.0}, 1e-9);
  CHECK(max_abs_diff(oracle.y, proj_softargmax({1.0, 2.0, 3.0})) <= 1e-6);
}

TEST_CASE("soc projection: three cases") {
  auto [inside_x, inside_y] = proj_soc({1.0, 0.0}, 2.0);
  CHECK(inside_x[0] == 1.0);
  CHECK(inside_y == 2.0);

  auto [polar_x, polar_y] = proj_soc({1.0, 0.0}, -2.0);
  CHECK(norm2(polar_x) == 0.0);
  CHECK(polar_y == 0.0);

  auto [mid_x, mid_y] = proj_soc({1.0, 0.0}, 0.0);
  CHECK(mid_x[0] == doctest::Approx(0.5));
  CHECK(mid_x[1] == 0.0);
  CHECK(mid_y == doctest::Approx(0.5));
}

TEST_CASE("psd projection: clamping, idempotency, nearest-point probes") {
  Matrix d(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = -2.0;
  const Matrix p = proj_psd(d);
  CHECK(p(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(p(1, 1)) <= 1e-12);
  CHECK(std::abs(p(0, 1)) <= 1e-12);

  Rng rng(6);
  Matrix sym(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = rng.normal();
      sym(i, j) = v;
      sym(j, i) = v;
    }
  const Matrix proj = proj_psd(sym);
  const Eigh eig = jacobi_eigh(proj);
  for (double lam : eig.values) CHECK(lam >= -1e-10);
  CHECK(frobenius_distance(proj_psd(proj), proj) <= 1e-10);
  // PSD input passes through
  CHECK(frobenius_distance(proj_psd(proj), proj) <= 1e-10);

  // no random PSD probe gets closer in Frobenius distance
  const double dist = frobenius_distance(proj, sym);
  for (int probe = 0; probe < 100; ++probe) {
    Matrix g(5, 5);
    for (double& e : g.data) e = rng.normal();
    const Matrix psd_probe = matmul(g, transpose(g));
    CHECK(dist <= frobenius_distance(psd_probe, sym) + 1e-12);
  }

  Matrix asym(2, 2);
  asym(0, 1) = 1.0;
  CHECK_THROWS(proj_psd(asym));
}

TEST_CASE("sphere projection: normalization and the origin error") {
  const Vec y = proj_sphere({2.0, 0.0, 0.0});
  CHECK(y[0] == 1.0);
  const Vec unit{0.0, 1.0, 0.0};
  CHECK(max_abs_diff(proj_sphere(unit), unit) == 0.0);
  CHECK_THROWS(proj_sphere({1e-13, 0.0, 0.0}));
}

TEST_CASE("regularized projections are not idempotent") {
  const double once = proj_sigmoid({3.0})[0];
  const double twice = proj_sigmoid({once})[0];
  CHECK(std::abs(twice - once) > 1e-3);

  const Vec p = proj_softargmax({3.0, 0.0});
  const Vec pp = proj_softargmax(p);
  CHECK(max_abs_diff(pp, p) > 1e-3);
}

TEST_CASE("euclidean projections are idempotent") {
  Rng rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    for (ProjectionKind kind : {ProjectionKind::relu_orthant, ProjectionKind::soc,
                                ProjectionKind::psd, ProjectionKind::sphere}) {
      const Vec x = random_input(kind, rng);
      const Vec once = project(kind, x);
      CHECK(max_abs_diff(project(kind, once), once) <= 1e-10);
    }
  }
}

TEST_CASE("closed forms match the variational numeric oracle") {
  Rng rng(10);
  for (ProjectionKind kind : {ProjectionKind::relu_orthant, ProjectionKind::sigmoid_cube,
                              ProjectionKind::softargmax_simplex}) {
    for (int rep = 0; rep < 50; ++rep) {
      const Vec x = random_input(kind, rng);
      const NumericProjResult oracle = proj_numeric_oracle(kind, x, 1e-9);
      CHECK(oracle.converged);
      CHECK(max_abs_diff(oracle.y, project(kind, x)) <= 1e-6);
    }
  }
  CHECK_THROWS(proj_numeric_oracle(ProjectionKind::soc, {1.0, 1.0}, 1e-9));
}

TEST_CASE("jvp formulas: analytic cases") {
  const JvpResult relu = proj_jvp(ProjectionKind::relu_orthant, {-1.0, 3.0}, {1.0, 1.0});
  CHECK(relu.tangent[0] == 0.0);
  CHECK(relu.tangent[1] == 1.0);

  const JvpResult sig = proj_jvp(ProjectionKind::sigmoid_cube, {0.0}, {1.0});
  CHECK(sig.tangent[0] == doctest::Approx(0.25));

  // sphere jvp equals (I - uu')v / |x|
  Rng rng(11);
  const Vec x = {1.0, 2.0, -0.5};
  const Vec v = rng.normal_vec(3);
  const Vec u = proj_sphere(x);
  const double n = norm2(x);
  Vec expect(3);
  const double uv = dot(u, v);
  for (int i = 0; i < 3; ++i) expect[i] = (v[i] - uv * u[i]) / n;
  CHECK(max_abs_diff(proj_jvp(ProjectionKind::sphere, x, v).tangent, expect) <= 1e-12);
}

TEST_CASE("jvps match finite differences away from boundaries") {
  Rng rng(12);
  for (ProjectionKind kind :
       {ProjectionKind::relu_orthant, ProjectionKind::sigmoid_cube,
        ProjectionKind::softargmax_simplex, ProjectionKind::soc, ProjectionKind::psd,
        ProjectionKind::sphere}) {
    int checked = 0;
    while (checked < 20) {
      const Vec x = random_input(kind, rng);
      Vec dir = rng.normal_vec(static_cast<int>(x.size()));
      if (kind == ProjectionKind::psd) dir = symmetrized(std::move(dir));
      const JvpResult jvp = proj_jvp(kind, x, dir);
      if (jvp.near_boundary) continue;
      CHECK(jvp_fd_error(kind, x, dir) <= 1e-5);
      ++checked;
    }
  }
}

TEST_CASE("boundary proximity raises the flag") {
  CHECK(proj_jvp(ProjectionKind::relu_orthant, {1e-9, 1.0}, {1.0, 0.0}).near_boundary);
  // soc case boundary |x| == y
  CHECK(proj_jvp(ProjectionKind::soc, {1.0, 0.0, 1.0 + 1e-10}, {1.0, 0.0, 0.0}).near_boundary);
  CHECK_FALSE(proj_jvp(ProjectionKind::relu_orthant, {1.0, -1.0}, {1.0, 0.0}).near_boundary);
}

TEST_CASE("psd jvp near a degenerate spectrum falls back to finite differences") {
  Matrix near_deg(3, 3);
  near_deg(0, 0) = 1.0;
  near_deg(1, 1) = 1.0 + 1e-8;  // clustered pair
  near_deg(2, 2) = -1.0;
  Rng rng(14);
  const Vec dir = symmetrized(rng.normal_vec(9));
  const JvpResult jvp = proj_jvp(ProjectionKind::psd, near_deg.data, dir);
  CHECK(jvp.near_boundary);
  CHECK(jvp_fd_error(ProjectionKind::psd, near_deg.data, dir) <= 1e-4);
}
