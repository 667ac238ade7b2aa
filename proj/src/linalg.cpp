#include "amort/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace amort {

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2sq(const Vec& a) { return dot(a, a); }
double norm2(const Vec& a) { return std::sqrt(norm2sq(a)); }

void axpy(double a, const Vec& x, Vec& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

Vec add(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

Vec sub(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

Vec scaled(const Vec& a, double s) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * s;
  return r;
}

Vec matvec(const Matrix& a, const Vec& x) {
  Vec r(a.rows, 0.0);
  for (int i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < a.cols; ++j) s += a(i, j) * x[j];
    r[i] = s;
  }
  return r;
}

Vec matvec_t(const Matrix& a, const Vec& x) {
  Vec r(a.cols, 0.0);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) r[j] += a(i, j) * x[i];
  return r;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      for (int j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double max_abs_diff(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Vec cholesky_solve(const Matrix& a, const Vec& b) {
  const int n = a.rows;
  Matrix l(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0) throw std::runtime_error("cholesky_solve: matrix not positive definite");
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  // forward then back substitution
  Vec y(n);
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  Vec x(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
    x[i] = s / l(i, i);
  }
  return x;
}

bool lu_solve_maybe(const Matrix& a, const Vec& b, Vec& x, double pivot_tol) {
  const int n = a.rows;
  Matrix lu = a;
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;

  double amax = 0.0;
  for (double v : a.data) amax = std::max(amax, std::abs(v));
  const double floor = pivot_tol * std::max(amax, 1.0);

  for (int k = 0; k < n; ++k) {
    int piv = k;
    double best = std::abs(lu(k, k));
    for (int i = k + 1; i < n; ++i) {
      if (std::abs(lu(i, k)) > best) {
        best = std::abs(lu(i, k));
        piv = i;
      }
    }
    if (best <= floor) return false;
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
      std::swap(perm[k], perm[piv]);
    }
    for (int i = k + 1; i < n; ++i) {
      lu(i, k) /= lu(k, k);
      const double m = lu(i, k);
      for (int j = k + 1; j < n; ++j) lu(i, j) -= m * lu(k, j);
    }
  }

  Vec y(n);
  for (int i = 0; i < n; ++i) {
    double s = b[perm[i]];
    for (int k = 0; k < i; ++k) s -= lu(i, k) * y[k];
    y[i] = s;
  }
  x.assign(n, 0.0);
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < n; ++k) s -= lu(i, k) * x[k];
    x[i] = s / lu(i, i);
  }
  return true;
}

Vec lu_solve(const Matrix& a, const Vec& b, double pivot_tol) {
  Vec x;
  if (!lu_solve_maybe(a, b, x, pivot_tol))
    throw std::runtime_error("lu_solve: singular matrix (pivot below tolerance)");
  return x;
}

Eigh jacobi_eigh(const Matrix& a, double tol, int max_sweeps) {
  const int n = a.rows;
  Matrix d = a;
  Matrix v = Matrix::identity(n);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += d(i, j) * d(i, j);
    if (std::sqrt(off) <= tol) break;

    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(d(p, q)) <= 1e-300) continue;
        const double theta = (d(q, q) - d(p, p)) / (2.0 * d(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double dkp = d(k, p), dkq = d(k, q);
          d(k, p) = c * dkp - s * dkq;
          d(k, q) = s * dkp + c * dkq;
        }
        for (int k = 0; k < n; ++k) {
          const double dpk = d(p, k), dqk = d(q, k);
          d(p, k) = c * dpk - s * dqk;
          d(q, k) = s * dpk + c * dqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  Eigh out;
  out.values.resize(n);
  for (int i = 0; i < n; ++i) out.values[i] = d(i, i);
  out.vectors = v;
  return out;
}

namespace {
// splitmix64, used only to build deterministic start vectors
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Vec deterministic_unit(int n) {
  Vec v(n);
  for (int i = 0; i < n; ++i) {
    const std::uint64_t h = splitmix64(static_cast<std::uint64_t>(i) + 1);
    v[i] = 2.0 * (static_cast<double>(h >> 11) * 0x1.0p-53) - 1.0;
  }
  const double nv = norm2(v);
  for (double& x : v) x /= nv;
  return v;
}
}  // namespace

double power_iteration_lmax(const std::function<Vec(const Vec&)>& op, int n, int iters) {
  Vec v = deterministic_unit(n);
  double lam = 0.0;
  for (int k = 0; k < iters; ++k) {
    Vec w = op(v);
    const double nw = norm2(w);
    if (nw == 0.0) return 0.0;
    lam = dot(v, w);
    for (int i = 0; i < n; ++i) v[i] = w[i] / nw;
  }
  return std::abs(lam);
}

double operator_norm(const Matrix& a, int iters) {
  auto op = [&](const Vec& x) { return matvec_t(a, matvec(a, x)); };
  const double lmax = power_iteration_lmax(op, a.cols, iters);
  return std::sqrt(std::max(0.0, lmax));
}

CgResult cg_solve(const std::function<Vec(const Vec&)>& op, const Vec& b, double tol,
                  int max_iters) {
  CgResult res;
  const std::size_t n = b.size();
  res.x.assign(n, 0.0);
  Vec r = b;
  Vec p = r;
  double rs = norm2sq(r);
  const double bnorm = std::max(norm2(b), 1e-300);
  for (int k = 0; k < max_iters; ++k) {
    if (std::sqrt(rs) / bnorm <= tol) {
      res.converged = true;
      break;
    }
    Vec ap = op(p);
    const double pap = dot(p, ap);
    if (pap <= 0.0) break;  // operator not SPD along p
    const double alpha = rs / pap;
    axpy(alpha, p, res.x);
    axpy(-alpha, ap, r);
    const double rs_new = norm2sq(r);
    const double beta = rs_new / rs;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    rs = rs_new;
    res.iters = k + 1;
  }
  if (!res.converged && std::sqrt(rs) / bnorm <= tol) res.converged = true;
  res.residual = std::sqrt(rs) / bnorm;
  return res;
}

}  // namespace amort
