#include "simcate/la/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace simcate::la {

namespace {

// Work threshold (in flops) below which the parallel variants stay serial.
constexpr std::uint64_t kParallelThreshold = 1u << 16;

void check_mul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
}

inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const std::size_t n = b.cols(), k = a.cols();
  double* ci = c.row_ptr(i);
  const double* ai = a.row_ptr(i);
  for (std::size_t p = 0; p < k; ++p) {
    const double aip = ai[p];
    const double* bp = b.row_ptr(p);
    for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
  }
}

}  // namespace

Matrix matmul_serial(const Matrix& a, const Matrix& b) {
  check_mul(a, b);
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) matmul_row(a, b, c, i);
  return c;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_mul(a, b);
  Matrix c(a.rows(), b.cols());
  const std::int64_t m = static_cast<std::int64_t>(a.rows());
  const std::uint64_t work = a.rows() * a.cols() * b.cols();
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
  for (std::int64_t i = 0; i < m; ++i) matmul_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Matrix matmul_at_b_serial(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("matmul_at_b: row mismatch");
  Matrix c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) {
    double* ci = c.row_ptr(i);
    for (std::size_t p = 0; p < a.rows(); ++p) {
      const double aip = a(p, i);
      const double* bp = b.row_ptr(p);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aip * bp[j];
    }
  }
  return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("matmul_at_b: row mismatch");
  Matrix c(a.cols(), b.cols());
  const std::int64_t m = static_cast<std::int64_t>(a.cols());
  const std::uint64_t work = a.rows() * a.cols() * b.cols();
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
  for (std::int64_t i = 0; i < m; ++i) {
    double* ci = c.row_ptr(static_cast<std::size_t>(i));
    for (std::size_t p = 0; p < a.rows(); ++p) {
      const double aip = a(p, static_cast<std::size_t>(i));
      const double* bp = b.row_ptr(p);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aip * bp[j];
    }
  }
  return c;
}

Matrix gram(const Matrix& a) { return matmul_at_b(a, a); }

Vector matvec(const Matrix& a, const Vector& x) {
  if (a.cols() != x.size()) throw std::invalid_argument("matvec: dimension mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row_ptr(i);
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += ai[j] * x[j];
    y[i] = s;
  }
  return y;
}

Vector matvec_t(const Matrix& a, const Vector& x) {
  if (a.rows() != x.size()) throw std::invalid_argument("matvec_t: dimension mismatch");
  Vector y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row_ptr(i);
    const double xi = x[i];
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += xi * ai[j];
  }
  return y;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

namespace {

inline void rbf_row(const Matrix& z, double g2h, Matrix& k, std::size_t i) {
  const std::size_t n = z.rows(), d = z.cols();
  const double* zi = z.row_ptr(i);
  double* ki = k.row_ptr(i);
  for (std::size_t j = 0; j < n; ++j) {
    const double* zj = z.row_ptr(j);
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double dcc = zi[c] - zj[c];
      sq += dcc * dcc;
    }
    ki[j] = std::exp(-g2h * sq);
  }
}

}  // namespace

Matrix rbf_kernel_serial(const Matrix& z, double gamma) {
  Matrix k(z.rows(), z.rows());
  const double g2h = 0.5 * gamma * gamma;
  for (std::size_t i = 0; i < z.rows(); ++i) rbf_row(z, g2h, k, i);
  return k;
}

Matrix rbf_kernel(const Matrix& z, double gamma) {
  Matrix k(z.rows(), z.rows());
  const double g2h = 0.5 * gamma * gamma;
  const std::int64_t n = static_cast<std::int64_t>(z.rows());
  const std::uint64_t work = z.rows() * z.rows() * z.cols();
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
  for (std::int64_t i = 0; i < n; ++i) rbf_row(z, g2h, k, static_cast<std::size_t>(i));
  return k;
}

Vector row_norms(const Matrix& e) {
  Vector n(e.rows());
  for (std::size_t i = 0; i < e.rows(); ++i) {
    double s = 0.0;
    const double* r = e.row_ptr(i);
    for (std::size_t j = 0; j < e.cols(); ++j) s += r[j] * r[j];
    n[i] = std::sqrt(s);
  }
  return n;
}

namespace {

inline void cosine_row(const Matrix& e, const Vector& norms, Matrix& c, std::size_t i) {
  const std::size_t n = e.rows(), d = e.cols();
  const double* ei = e.row_ptr(i);
  double* ci = c.row_ptr(i);
  for (std::size_t j = 0; j < n; ++j) {
    const double* ej = e.row_ptr(j);
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += ei[k] * ej[k];
    ci[j] = s / (norms[i] * norms[j]);
  }
}

void check_norms(const Vector& norms, double eps) {
  for (double n : norms)
    if (!(n > eps)) throw std::runtime_error("pairwise_cosine: zero-norm embedding");
}

}  // namespace

Matrix pairwise_cosine_serial(const Matrix& e, double eps) {
  const Vector norms = row_norms(e);
  check_norms(norms, eps);
  Matrix c(e.rows(), e.rows());
  for (std::size_t i = 0; i < e.rows(); ++i) cosine_row(e, norms, c, i);
  return c;
}

Matrix pairwise_cosine(const Matrix& e, double eps) {
  const Vector norms = row_norms(e);
  check_norms(norms, eps);
  Matrix c(e.rows(), e.rows());
  const std::int64_t n = static_cast<std::int64_t>(e.rows());
  const std::uint64_t work = e.rows() * e.rows() * e.cols();
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
  for (std::int64_t i = 0; i < n; ++i) cosine_row(e, norms, c, static_cast<std::size_t>(i));
  return c;
}

Matrix normalize_rows(const Matrix& e, double eps) {
  const Vector norms = row_norms(e);
  check_norms(norms, eps);
  Matrix out(e.rows(), e.cols());
  for (std::size_t i = 0; i < e.rows(); ++i)
    for (std::size_t j = 0; j < e.cols(); ++j) out(i, j) = e(i, j) / norms[i];
  return out;
}

}  // namespace simcate::la
