#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "simcate/la/decomp.hpp"
#include "simcate/la/kernels.hpp"
#include "simcate/rng.hpp"

using namespace simcate;
using la::Matrix;
using la::Vector;

TEST_CASE("matmul matches hand result") {
  Matrix a{{1, 2}, {3, 4}};
  Matrix b{{5, 6}, {7, 8}};
  Matrix c = la::matmul(a, b);
  CHECK(c(0, 0) == doctest::Approx(19));
  CHECK(c(0, 1) == doctest::Approx(22));
  CHECK(c(1, 0) == doctest::Approx(43));
  CHECK(c(1, 1) == doctest::Approx(50));
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  Rng rng(11);
  const Matrix a = rng.normal_matrix(173, 64);
  const Matrix b = rng.normal_matrix(64, 91);
  CHECK(la::max_abs_diff(la::matmul(a, b), la::matmul_serial(a, b)) == 0.0);
  CHECK(la::max_abs_diff(la::matmul_at_b(a, a), la::matmul_at_b_serial(a, a)) == 0.0);

  const Matrix z = rng.normal_matrix(140, 6);
  CHECK(la::max_abs_diff(la::rbf_kernel(z, 0.7), la::rbf_kernel_serial(z, 0.7)) == 0.0);
  const Matrix e = rng.normal_matrix(130, 8);
  CHECK(la::max_abs_diff(la::pairwise_cosine(e, 1e-12),
                         la::pairwise_cosine_serial(e, 1e-12)) == 0.0);
}

TEST_CASE("rbf kernel diagonal is one and off-diagonal decays") {
  Rng rng(3);
  const Matrix z = rng.normal_matrix(20, 4);
  const Matrix k = la::rbf_kernel(z, 1.3);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(k(i, i) == doctest::Approx(1.0));
    for (std::size_t j = 0; j < 20; ++j) {
      CHECK(k(i, j) <= 1.0 + 1e-15);
      CHECK(k(i, j) == doctest::Approx(k(j, i)));
    }
  }
}

TEST_CASE("lstsq recovers planted coefficients") {
  Rng rng(5);
  const Matrix x = rng.normal_matrix(60, 4);
  const Vector beta = {1.5, -2.0, 0.25, 3.0};
  const Vector y = la::matvec(x, beta);
  const Vector fit = la::lstsq_vec(x, y);
  for (std::size_t i = 0; i < 4; ++i) CHECK(fit[i] == doctest::Approx(beta[i]).epsilon(1e-10));
}

TEST_CASE("lstsq rejects rank-deficient designs") {
  Matrix x(10, 2);
  for (std::size_t i = 0; i < 10; ++i) {
    x(i, 0) = static_cast<double>(i);
    x(i, 1) = 2.0 * static_cast<double>(i);  // collinear
  }
  Vector y(10, 1.0);
  CHECK_THROWS_AS(la::lstsq_vec(x, y), std::runtime_error);
}

TEST_CASE("inverse round trip") {
  Rng rng(9);
  const Matrix a = rng.normal_matrix(8, 8);
  const Matrix inv = la::inverse(a);
  const Matrix eye = la::matmul(a, inv);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j)
      CHECK(eye(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));
}

TEST_CASE("cholesky solves SPD systems") {
  Rng rng(13);
  const Matrix a = rng.normal_matrix(30, 6);
  Matrix g = la::gram(a);
  for (std::size_t i = 0; i < 6; ++i) g(i, i) += 0.1;
  Matrix l;
  REQUIRE(la::cholesky(g, l));
  const Vector b = rng.normal_vector(6);
  const Vector x = la::cholesky_solve(l, b);
  const Vector back = la::matvec(g, x);
  for (std::size_t i = 0; i < 6; ++i) CHECK(back[i] == doctest::Approx(b[i]).epsilon(1e-9));

  Matrix not_pd = Matrix::identity(3);
  not_pd(2, 2) = -1.0;
  CHECK_FALSE(la::cholesky(not_pd, l));
}

TEST_CASE("jacobi svd factors a random matrix") {
  Rng rng(17);
  const Matrix a = rng.normal_matrix(12, 5);
  const la::Svd s = la::svd_small(a);
  // Reconstruction U diag(S) V^T.
  Matrix us(12, 5);
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 5; ++j) us(i, j) = s.u(i, j) * s.sigma[j];
  const Matrix rec = la::matmul(us, la::transpose(s.v));
  CHECK(la::max_abs_diff(rec, a) < 1e-10);
  for (std::size_t j = 1; j < 5; ++j) CHECK(s.sigma[j - 1] >= s.sigma[j]);
  // V orthogonal.
  const Matrix vtv = la::matmul_at_b(s.v, s.v);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      CHECK(vtv(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
}

TEST_CASE("condition number of identity is one") {
  CHECK(la::cond_spectral(Matrix::identity(6)) == doctest::Approx(1.0));
}

TEST_CASE("rng determinism and normal moments") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng rng(123);
  double mean = 0.0, var = 0.0;
  const int n = 20000;
  Vector v(n);
  for (int i = 0; i < n; ++i) {
    v[i] = rng.normal();
    mean += v[i];
  }
  mean /= n;
  for (int i = 0; i < n; ++i) var += (v[i] - mean) * (v[i] - mean);
  var /= n;
  CHECK(std::fabs(mean) < 0.03);
  CHECK(std::fabs(var - 1.0) < 0.05);
}
