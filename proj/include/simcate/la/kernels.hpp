#pragma once

#include "simcate/la/matrix.hpp"

namespace simcate::la {

// Data-parallel kernels. Each kernel has an OpenMP implementation (the
// default entry point, parallelized over output rows) and a `_serial`
// reference used by the tests and the benchmark. Both variants perform the
// arithmetic in the same order per output element, so results are
// bit-identical regardless of thread count.

/// C = A * B.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_serial(const Matrix& a, const Matrix& b);

/// C = A^T * B.
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
Matrix matmul_at_b_serial(const Matrix& a, const Matrix& b);

/// A^T * A.
Matrix gram(const Matrix& a);

/// y = A * x.
Vector matvec(const Matrix& a, const Vector& x);

/// y = A^T * x.
Vector matvec_t(const Matrix& a, const Vector& x);

Matrix transpose(const Matrix& a);

/// RBF kernel matrix K_ij = exp(-gamma^2 * ||z_i - z_j||^2 / 2) over rows of z.
Matrix rbf_kernel(const Matrix& z, double gamma);
Matrix rbf_kernel_serial(const Matrix& z, double gamma);

/// Row L2 norms of e.
Vector row_norms(const Matrix& e);

/// Cosine similarity between all row pairs: C_ij = e_i . e_j / (|e_i||e_j|).
/// Norms below `eps` raise a numerical error.
Matrix pairwise_cosine(const Matrix& e, double eps);
Matrix pairwise_cosine_serial(const Matrix& e, double eps);

/// Rows scaled to unit L2 norm (throws when a row norm is below eps).
Matrix normalize_rows(const Matrix& e, double eps);

}  // namespace simcate::la
