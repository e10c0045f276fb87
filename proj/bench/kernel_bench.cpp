// Compares the serial reference kernels against the OpenMP implementations
// and checks that both produce bit-identical results.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "simcate/la/kernels.hpp"
#include "simcate/rng.hpp"

using simcate::Rng;
using simcate::la::Matrix;

namespace {

double time_ms(const std::function<Matrix()>& fn, int reps, Matrix& out) {
  // Warmup.
  out = fn();
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) out = fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void bench_case(const std::string& name, const std::function<Matrix()>& serial,
                const std::function<Matrix()>& parallel, int reps) {
  Matrix a, b;
  const double ts = time_ms(serial, reps, a);
  const double tp = time_ms(parallel, reps, b);
  const double diff = simcate::la::max_abs_diff(a, b);
  std::printf("%-28s serial %9.3f ms   omp %9.3f ms   speedup %5.2fx   max|diff| %g\n",
              name.c_str(), ts, tp, ts / tp, diff);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads = %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP disabled; both columns run the same serial code\n");
#endif

  Rng rng(7);
  const Matrix a = rng.normal_matrix(384, 384);
  const Matrix b = rng.normal_matrix(384, 384);
  const Matrix z = rng.normal_matrix(1200, 10);
  const Matrix e = rng.normal_matrix(1024, 16);

  bench_case(
      "matmul 384x384", [&] { return simcate::la::matmul_serial(a, b); },
      [&] { return simcate::la::matmul(a, b); }, 5);
  bench_case(
      "matmul_at_b 384x384", [&] { return simcate::la::matmul_at_b_serial(a, b); },
      [&] { return simcate::la::matmul_at_b(a, b); }, 5);
  bench_case(
      "rbf_kernel 1200x10", [&] { return simcate::la::rbf_kernel_serial(z, 0.4); },
      [&] { return simcate::la::rbf_kernel(z, 0.4); }, 5);
  bench_case(
      "pairwise_cosine 1024x16", [&] { return simcate::la::pairwise_cosine_serial(e, 1e-12); },
      [&] { return simcate::la::pairwise_cosine(e, 1e-12); }, 5);
  return 0;
}
