#pragma once

#include <utility>

#include "simcate/cate_model.hpp"
#include "simcate/dgp.hpp"

namespace simcate::linear_estimators {

using dgp::LinearDgpPair;
using dgp::ObservationalDataset;
using dgp::SimulatorDataset;
using la::Matrix;
using la::Vector;

struct AltMinConfig {
  double lambda_f = 1.0;
  double lambda_tau = 1.0;
  std::size_t max_sweeps = 500;
  double rel_tol = 1e-10;
  double ridge_w = 0.0;  // optional L2 penalty on the outcome heads

  void validate() const;
};

struct FitReport {
  std::vector<double> objective_trace;  // objective value after init and each sweep
  std::size_t sweeps = 0;
  bool converged = false;
};

/// Per-arm ordinary least squares on (x, y); prediction x (b1 - b0) is
/// independent of t.
CateModel fit_real_only_linear(const ObservationalDataset& d_trn);

/// Outcome heads by least squares on extracted latents f_tilde_t(x).
CateModel fit_mu_only_linear(const ObservationalDataset& d_trn, const EncoderPair& f_tilde);

/// Regresses y1 - y0 on f_tilde_0(x0); prediction f_tilde_t(x) . w_tau_s.
CateModel fit_sim_only_linear(const SimulatorDataset& d_syn, const EncoderPair& f_tilde);

/// Alternating closed-form minimization of the joint objective
///   sum_t ||X_t Rhat_t w_t - y_t||^2
///   + lambda_f sum_t ||X_t (Rhat_t - Ftilde_t)||_F^2
///   + lambda_tau ||Z_s (w_1 - w_0) - (y1s - y0s)||^2,
/// with Z_s = f_tilde_0(x0s). Each block update is an exact minimizer, so the
/// objective trace is non-increasing.
std::pair<CateModel, FitReport> fit_simponet_linear(const ObservationalDataset& d_trn,
                                                    const SimulatorDataset& d_syn,
                                                    const EncoderPair& f_tilde,
                                                    const AltMinConfig& cfg);

/// Closed-form squared CATE error of sim_only / real_only / mu_only at a
/// single test covariate observed under treatment t (population setting,
/// noiseless). simponet has no closed form and is rejected.
double analytic_cate_error(const LinearDgpPair& spec, const Vector& x_star, int t,
                           CateModel::Kind method);

Vector predict_cate(const CateModel& model, const Matrix& x, const std::vector<int>& t);

}  // namespace simcate::linear_estimators
