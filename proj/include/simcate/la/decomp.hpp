#pragma once

#include "simcate/la/matrix.hpp"

namespace simcate::la {

/// Lower Cholesky factor of a symmetric positive definite matrix.
/// Returns false (leaving `l` unspecified) when a pivot is not positive.
bool cholesky(const Matrix& a, Matrix& l);

/// Solves L L^T x = b given the lower factor.
Vector cholesky_solve(const Matrix& l, const Vector& b);

/// Inverse via LU with partial pivoting; throws on (near-)singularity.
Matrix inverse(const Matrix& a);

/// Least squares argmin_X ||A X - B||_F via Householder QR.
/// Throws std::runtime_error when A is rank deficient (relative pivot
/// threshold `rcond`). `what` names the system in error messages.
Matrix lstsq(const Matrix& a, const Matrix& b, const char* what = "lstsq",
             double rcond = 1e-12);
Vector lstsq_vec(const Matrix& a, const Vector& b, const char* what = "lstsq",
                 double rcond = 1e-12);

struct Svd {
  Matrix u;       // m x n, orthonormal columns
  Vector sigma;   // n, descending
  Matrix v;       // n x n
};

/// One-sided Jacobi SVD, intended for small matrices (latent-dimension scale).
Svd svd_small(const Matrix& a);

/// Spectral condition number sigma_max / sigma_min.
double cond_spectral(const Matrix& a);

}  // namespace simcate::la
