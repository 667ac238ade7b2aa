#include "amort/projections.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace amort {

namespace {
constexpr double kBoundaryTol = 1e-8;

int square_side(std::size_t len) {
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(len))));
  if (static_cast<std::size_t>(k) * k != len)
    throw std::invalid_argument("psd projection: flat input is not a square matrix");
  return k;
}

Matrix unflatten(const Vec& v) {
  const int k = square_side(v.size());
  Matrix m(k, k);
  m.data = v;
  return m;
}
}  // namespace

const char* projection_name(ProjectionKind kind) {
  switch (kind) {
    case ProjectionKind::relu_orthant: return "relu_orthant";
    case ProjectionKind::sigmoid_cube: return "sigmoid_cube";
    case ProjectionKind::softargmax_simplex: return "softargmax_simplex";
    case ProjectionKind::soc: return "soc";
    case ProjectionKind::psd: return "psd";
    case ProjectionKind::sphere: return "sphere";
  }
  return "?";
}

ProjectionKind projection_from_name(const std::string& name) {
  if (name == "relu_orthant") return ProjectionKind::relu_orthant;
  if (name == "sigmoid_cube") return ProjectionKind::sigmoid_cube;
  if (name == "softargmax_simplex") return ProjectionKind::softargmax_simplex;
  if (name == "soc") return ProjectionKind::soc;
  if (name == "psd") return ProjectionKind::psd;
  if (name == "sphere") return ProjectionKind::sphere;
  throw std::invalid_argument("unknown projection kind: " + name);
}

Vec proj_relu(const Vec& x) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

Vec proj_sigmoid(const Vec& x) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
  return y;
}

Vec proj_softargmax(const Vec& x) {
  const double mx = *std::max_element(x.begin(), x.end());
  Vec y(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - mx);
    s += y[i];
  }
  for (double& v : y) v /= s;
  return y;
}

std::pair<Vec, double> proj_soc(const Vec& x, double y) {
  const double nx = norm2(x);
  if (nx <= -y) return {Vec(x.size(), 0.0), 0.0};
  if (nx <= y) return {x, y};
  const double c = 0.5 * (1.0 + y / nx);
  return {scaled(x, c), c * nx};
}

Matrix proj_psd(const Matrix& x) {
  if (x.rows != x.cols) throw std::invalid_argument("proj_psd: matrix must be square");
  if (x.rows > 16) throw std::invalid_argument("proj_psd: supported up to k = 16");
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < i; ++j)
      if (std::abs(x(i, j) - x(j, i)) > 1e-10)
        throw std::invalid_argument("proj_psd: input not symmetric");

  const Eigh eig = jacobi_eigh(x);
  const int k = x.rows;
  Matrix out(k, k);
  for (int e = 0; e < k; ++e) {
    const double lam = std::max(eig.values[e], 0.0);
    if (lam == 0.0) continue;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) out(i, j) += lam * eig.vectors(i, e) * eig.vectors(j, e);
  }
  // round back to exact symmetry lost to accumulation order
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < i; ++j) {
      const double m = 0.5 * (out(i, j) + out(j, i));
      out(i, j) = m;
      out(j, i) = m;
    }
  return out;
}

Vec proj_sphere(const Vec& x) {
  const double n = norm2(x);
  if (n <= 1e-12)
    throw std::invalid_argument("proj_sphere: undefined near the origin (|x| <= 1e-12)");
  return scaled(x, 1.0 / n);
}

Vec project(ProjectionKind kind, const Vec& input) {
  switch (kind) {
    case ProjectionKind::relu_orthant: return proj_relu(input);
    case ProjectionKind::sigmoid_cube: return proj_sigmoid(input);
    case ProjectionKind::softargmax_simplex: return proj_softargmax(input);
    case ProjectionKind::soc: {
      Vec x(input.begin(), input.end() - 1);
      auto [px, py] = proj_soc(x, input.back());
      px.push_back(py);
      return px;
    }
    case ProjectionKind::psd: return proj_psd(unflatten(input)).data;
    case ProjectionKind::sphere: return proj_sphere(input);
  }
  throw std::logic_error("project: unhandled kind");
}

namespace {

JvpResult psd_jvp(const Vec& input, const Vec& dir) {
  JvpResult res;
  const Matrix x = unflatten(input);
  const Matrix v = unflatten(dir);
  const int k = x.rows;
  const Eigh eig = jacobi_eigh(x);

  bool degenerate = false;
  for (int i = 0; i < k && !degenerate; ++i) {
    if (std::abs(eig.values[i]) < kBoundaryTol) res.near_boundary = true;
    for (int j = i + 1; j < k; ++j)
      if (std::abs(eig.values[i] - eig.values[j]) < 1e-6) degenerate = true;
  }

  if (degenerate) {
    // clustered spectrum: eigenvectors are unstable, fall back to central
    // differences of the projection itself
    const double h = 1e-6;
    Matrix xp = x, xm = x;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      xp.data[i] += h * v.data[i];
      xm.data[i] -= h * v.data[i];
    }
    const Matrix pp = proj_psd(xp);
    const Matrix pm = proj_psd(xm);
    res.tangent.resize(input.size());
    for (std::size_t i = 0; i < input.size(); ++i)
      res.tangent[i] = (pp.data[i] - pm.data[i]) / (2.0 * h);
    res.near_boundary = true;
    return res;
  }

  // Daleckii-Krein: dpi = Q (Gamma o (Q^T V Q)) Q^T with divided differences
  // of lambda -> max(lambda, 0).
  const Matrix qt_v_q = matmul(transpose(eig.vectors), matmul(v, eig.vectors));
  Matrix inner(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      const double li = eig.values[i], lj = eig.values[j];
      double gamma;
      if (i == j || std::abs(li - lj) < 1e-14)
        gamma = li > 0.0 ? 1.0 : 0.0;
      else
        gamma = (std::max(li, 0.0) - std::max(lj, 0.0)) / (li - lj);
      inner(i, j) = gamma * qt_v_q(i, j);
    }
  res.tangent = matmul(eig.vectors, matmul(inner, transpose(eig.vectors))).data;
  return res;
}

}  // namespace

JvpResult proj_jvp(ProjectionKind kind, const Vec& input, const Vec& dir) {
  JvpResult res;
  switch (kind) {
    case ProjectionKind::relu_orthant: {
      res.tangent.resize(input.size());
      for (std::size_t i = 0; i < input.size(); ++i) {
        if (std::abs(input[i]) < kBoundaryTol) res.near_boundary = true;
        res.tangent[i] = input[i] > 0.0 ? dir[i] : 0.0;
      }
      return res;
    }
    case ProjectionKind::sigmoid_cube: {
      res.tangent.resize(input.size());
      for (std::size_t i = 0; i < input.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-input[i]));
        res.tangent[i] = s * (1.0 - s) * dir[i];
      }
      return res;
    }
    case ProjectionKind::softargmax_simplex: {
      const Vec p = proj_softargmax(input);
      const double pv = dot(p, dir);
      res.tangent.resize(input.size());
      for (std::size_t i = 0; i < input.size(); ++i) res.tangent[i] = p[i] * (dir[i] - pv);
      return res;
    }
    case ProjectionKind::soc: {
      const std::size_t m = input.size() - 1;
      const Vec x(input.begin(), input.end() - 1);
      const Vec vx(dir.begin(), dir.end() - 1);
      const double y = input.back(), vy = dir.back();
      const double nx = norm2(x);
      if (std::abs(nx + y) < kBoundaryTol || std::abs(nx - y) < kBoundaryTol)
        res.near_boundary = true;
      if (nx <= -y) {
        res.tangent.assign(m + 1, 0.0);
      } else if (nx <= y) {
        res.tangent = dir;
      } else {
        // pi(x, y) = 1/2 (1 + y/|x|) (x, |x|)
        const double c = 0.5 * (1.0 + y / nx);
        const double xv = dot(x, vx);
        Vec tx(m);
        for (std::size_t i = 0; i < m; ++i)
          tx[i] = c * vx[i] + 0.5 * (vy / nx - y * xv / (nx * nx * nx)) * x[i];
        const double ty = 0.5 * (xv / nx) + 0.5 * vy;
        res.tangent = tx;
        res.tangent.push_back(ty);
      }
      return res;
    }
    case ProjectionKind::psd: return psd_jvp(input, dir);
    case ProjectionKind::sphere: {
      const double n = norm2(input);
      if (n <= kBoundaryTol) res.near_boundary = true;
      const Vec u = proj_sphere(input);
      const double uv = dot(u, dir);
      res.tangent.resize(input.size());
      for (std::size_t i = 0; i < input.size(); ++i) res.tangent[i] = (dir[i] - uv * u[i]) / n;
      return res;
    }
  }
  throw std::logic_error("proj_jvp: unhandled kind");
}

NumericProjResult proj_numeric_oracle(ProjectionKind kind, const Vec& input, double tol) {
  NumericProjResult res;
  switch (kind) {
    case ProjectionKind::relu_orthant: {
      // projected gradient on 1/2 |y - x|^2 over the orthant
      Vec y(input.size(), 0.0);
      res.converged = false;
      for (int it = 0; it < 10000; ++it) {
        double change = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
          const double yn = std::max(0.0, y[i] - 0.5 * (y[i] - input[i]));
          change = std::max(change, std::abs(yn - y[i]));
          y[i] = yn;
        }
        if (change <= tol * 1e-3) {
          res.converged = true;
          break;
        }
      }
      res.y = y;
      return res;
    }
    case ProjectionKind::sigmoid_cube: {
      // stationarity of -x y + y log y + (1-y) log(1-y): log(y/(1-y)) = x,
      // solved per coordinate by bisection
      res.y.resize(input.size());
      res.converged = true;
      for (std::size_t i = 0; i < input.size(); ++i) {
        double lo = 1e-15, hi = 1.0 - 1e-15;
        for (int it = 0; it < 200 && hi - lo > tol * 1e-3; ++it) {
          const double mid = 0.5 * (lo + hi);
          if (std::log(mid / (1.0 - mid)) < input[i])
            lo = mid;
          else
            hi = mid;
        }
        res.y[i] = 0.5 * (lo + hi);
      }
      return res;
    }
    case ProjectionKind::softargmax_simplex: {
      // y_i = exp(x_i - 1 - nu) with nu chosen so the y sum to one
      const double mx = *std::max_element(input.begin(), input.end());
      double lo = mx - 1.0 - std::log(static_cast<double>(input.size())) - 40.0;
      double hi = mx - 1.0 + 40.0;
      auto total = [&](double nu) {
        double s = 0.0;
        for (double v : input) s += std::exp(v - 1.0 - nu);
        return s;
      };
      for (int it = 0; it < 400 && hi - lo > tol * 1e-6; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (total(mid) > 1.0)
          lo = mid;
        else
          hi = mid;
      }
      const double nu = 0.5 * (lo + hi);
      res.y.resize(input.size());
      for (std::size_t i = 0; i < input.size(); ++i) res.y[i] = std::exp(input[i] - 1.0 - nu);
      res.converged = true;
      return res;
    }
    default:
      throw std::invalid_argument(
          "proj_numeric_oracle: only kinds with a variational definition are supported");
  }
}

}  // namespace amort
