#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>

#include "simcate/cate_model.hpp"
#include "simcate/dgp.hpp"

namespace simcate::metrics {

using dgp::LinearDgpPair;
using dgp::ObservationalDataset;
using la::Matrix;
using la::Vector;

struct ErrorSummary {
  double mse = 0.0;
  double rmse = 0.0;
};

ErrorSummary cate_error(const Vector& pred, const Vector& truth);

/// Overall factual MSE plus per-sample squared errors.
std::pair<double, Vector> factual_error(const CateModel& model,
                                        const ObservationalDataset& data);

enum class DistanceKind { kXGivenT, kZSpace, kTauOnPoints };

using VectorFieldFn = std::function<Matrix(const Matrix&)>;

/// Mean squared output discrepancy between two functions over probe rows.
/// kXGivenT compares vector-valued extractors; the other kinds compare
/// scalar functions (single-column outputs).
double empirical_distance(DistanceKind kind, const VectorFieldFn& a, const VectorFieldFn& b,
                          const Matrix& probe);

/// CDF of Student's t distribution via the regularized incomplete beta.
double student_t_cdf(double t, double df);

/// One-sided paired test of H1: mean(b - a) > 0 on per-sample errors
/// (small p means method a is better). Conventions: all differences zero
/// -> 0.5; zero spread with nonzero mean -> 0 or 1 by sign.
double paired_t_test_one_sided(const Vector& a_sq_errors, const Vector& b_sq_errors);

struct BoundReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // rhs - lhs
  double k_tau = 0.0;
  std::map<std::string, double> components;

  std::string to_json_string() const;
};

/// Empirical check of the factual/counterfactual decomposition
/// eps_cate^t <= 2 eps_f^t + 2 eps_cf^t on covariates rendered under t,
/// with ground truth taken from the linear spec (noiseless).
BoundReport check_decomposition_bound(const CateModel& model, const LinearDgpPair& spec,
                                      const Matrix& probe_z, int t);

/// Empirical check of the simulator-assisted generalization bound
///   eps_cate^t <= 8 eps_f^t + 12 d_h(tau_hat, tau_tilde)
///                + 12 K^2 d_{x|t}(f_hat, f_tilde)
///                + 12 d_z(tau, tau_s) + 12 K^2 d_{x|t}(f, f_s),
/// with K = max(|w_tau|, |w_hat_1 - w_hat_0|). Requires linear heads so the
/// Lipschitz constant is available in closed form. d_h is evaluated at the
/// f_tilde_t(x^S) points.
BoundReport check_generalization_bound(const CateModel& model, const LinearDgpPair& spec,
                                       const EncoderPair& f_tilde, const Vector& w_tau_tilde,
                                       const Matrix& probe_z, int t);

}  // namespace simcate::metrics
