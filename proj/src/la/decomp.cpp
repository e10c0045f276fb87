#include "simcate/la/decomp.hpp"

#include "simcate/la/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace simcate::la {

bool cholesky(const Matrix& a, Matrix& l) {
  if (a.rows() != a.cols()) throw std::invalid_argument("cholesky: matrix not square");
  const std::size_t n = a.rows();
  l = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0 || !std::isfinite(s)) return false;
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return true;
}

Vector cholesky_solve(const Matrix& l, const Vector& b) {
  const std::size_t n = l.rows();
  if (b.size() != n) throw std::invalid_argument("cholesky_solve: dimension mismatch");
  Vector y(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

Matrix inverse(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("inverse: matrix not square");
  const std::size_t n = a.rows();
  Matrix lu = a;
  Matrix inv = Matrix::identity(n);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    double best = std::fabs(lu(c, c));
    for (std::size_t r = c + 1; r < n; ++r) {
      const double v = std::fabs(lu(r, c));
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (best < 1e-13) throw std::runtime_error("inverse: singular matrix");
    if (piv != c) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(lu(piv, j), lu(c, j));
        std::swap(inv(piv, j), inv(c, j));
      }
    }
    const double d = lu(c, c);
    for (std::size_t j = 0; j < n; ++j) {
      lu(c, j) /= d;
      inv(c, j) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = lu(r, c);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        lu(r, j) -= f * lu(c, j);
        inv(r, j) -= f * inv(c, j);
      }
    }
  }
  return inv;
}

Matrix lstsq(const Matrix& a, const Matrix& b, const char* what, double rcond) {
  const std::size_t m = a.rows(), n = a.cols();
  if (b.rows() != m) throw std::invalid_argument(std::string(what) + ": row mismatch");
  if (m < n)
    throw std::runtime_error(std::string(what) + ": underdetermined system (" +
                             std::to_string(m) + " rows < " + std::to_string(n) + " cols)");
  Matrix r = a;
  Matrix qtb = b;

  // Householder triangularization applied to [A | B].
  for (std::size_t k = 0; k < n; ++k) {
    double alpha = 0.0;
    for (std::size_t i = k; i < m; ++i) alpha += r(i, k) * r(i, k);
    alpha = std::sqrt(alpha);
    if (r(k, k) > 0) alpha = -alpha;
    Vector v(m - k, 0.0);
    v[0] = r(k, k) - alpha;
    for (std::size_t i = k + 1; i < m; ++i) v[i - k] = r(i, k);
    double vnorm2 = 0.0;
    for (double x : v) vnorm2 += x * x;
    if (vnorm2 > 0.0) {
      const double inv_vn = 2.0 / vnorm2;
      for (std::size_t j = k; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = k; i < m; ++i) s += v[i - k] * r(i, j);
        s *= inv_vn;
        for (std::size_t i = k; i < m; ++i) r(i, j) -= s * v[i - k];
      }
      for (std::size_t j = 0; j < qtb.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = k; i < m; ++i) s += v[i - k] * qtb(i, j);
        s *= inv_vn;
        for (std::size_t i = k; i < m; ++i) qtb(i, j) -= s * v[i - k];
      }
    }
    r(k, k) = alpha;
  }

  double max_diag = 0.0;
  for (std::size_t k = 0; k < n; ++k) max_diag = std::max(max_diag, std::fabs(r(k, k)));
  for (std::size_t k = 0; k < n; ++k)
    if (std::fabs(r(k, k)) <= rcond * max_diag || r(k, k) == 0.0)
      throw std::runtime_error(std::string(what) + ": rank-deficient design matrix");

  Matrix x(n, b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t kk = n; kk-- > 0;) {
      double s = qtb(kk, j);
      for (std::size_t p = kk + 1; p < n; ++p) s -= r(kk, p) * x(p, j);
      x(kk, j) = s / r(kk, kk);
    }
  }
  return x;
}

Vector lstsq_vec(const Matrix& a, const Vector& b, const char* what, double rcond) {
  Matrix x = lstsq(a, Matrix::from_col(b), what, rcond);
  return x.col(0);
}

Svd svd_small(const Matrix& a) {
  const std::size_t m = a.rows(), n = a.cols();
  if (m < n) {
    // Work on the transpose and swap factors back.
    Svd t = svd_small(transpose(a));
    return Svd{t.v, t.sigma, t.u};
  }
  Matrix u = a;
  Matrix v = Matrix::identity(n);

  const double eps = std::numeric_limits<double>::epsilon();
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, g = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += u(i, p) * u(i, p);
          beta += u(i, q) * u(i, q);
          g += u(i, p) * u(i, q);
        }
        off = std::max(off, std::fabs(g) / std::sqrt(std::max(alpha * beta, 1e-300)));
        if (std::fabs(g) <= eps * std::sqrt(alpha * beta)) continue;
        const double zeta = (beta - alpha) / (2.0 * g);
        const double t_rot =
            (zeta >= 0 ? 1.0 : -1.0) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t_rot * t_rot);
        const double s = c * t_rot;
        for (std::size_t i = 0; i < m; ++i) {
          const double up = u(i, p), uq = u(i, q);
          u(i, p) = c * up - s * uq;
          u(i, q) = s * up + c * uq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (off < 1e-14) break;
  }

  Svd out;
  out.sigma.assign(n, 0.0);
  out.u = Matrix(m, n);
  out.v = Matrix(n, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Vector sig(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += u(i, j) * u(i, j);
    sig[j] = std::sqrt(s);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sig[x] > sig[y]; });
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.sigma[j] = sig[src];
    const double inv = sig[src] > 0.0 ? 1.0 / sig[src] : 0.0;
    for (std::size_t i = 0; i < m; ++i) out.u(i, j) = u(i, src) * inv;
    for (std::size_t i = 0; i < n; ++i) out.v(i, j) = v(i, src);
  }
  return out;
}

double cond_spectral(const Matrix& a) {
  const Svd s = svd_small(a);
  const double smin = s.sigma.back();
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return s.sigma.front() / smin;
}

}  // namespace simcate::la
