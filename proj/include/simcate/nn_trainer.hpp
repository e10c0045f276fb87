#pragma once

#include <utility>

#include "simcate/cate_model.hpp"
#include "simcate/dgp.hpp"
#include "simcate/linear_estimators.hpp"

namespace simcate::nn {

using dgp::ObservationalDataset;
using dgp::SimulatorDataset;
using la::Matrix;
using la::Vector;
using linear_estimators::FitReport;

struct TrainConfig {
  double lambda_f = 1.0;
  double lambda_tau = 1.0;
  std::size_t steps = 5000;
  double step_size = 1e-3;
  std::size_t eval_every = 50;
  std::size_t patience = 10;
  double val_fraction = 0.3;
  std::size_t hidden = 50;

  void validate() const;
};

struct StratifiedSplit {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
};

/// Treatment-stratified holdout split.
StratifiedSplit stratified_split(const std::vector<int>& t, double val_fraction, Rng& rng);

/// One-sided paired test of H1: mean(mu_only - real_only) > 0 on per-sample
/// validation squared errors. Significantly worse mu_only factual error
/// signals unreliable simulator representations, so the extractor
/// regularizer weight drops to 1e-4; otherwise it stays at 1.
double select_lambda_f(const Vector& real_only_val_sq_errors,
                       const Vector& mu_only_val_sq_errors, double alpha = 0.05);

struct SimponetParams {
  std::array<Matrix, 2> f_hat;  // linear extractors
  std::array<Mlp, 2> mu;        // outcome heads
};

struct SimponetGrads {
  std::array<Matrix, 2> f_hat;
  std::array<MlpGrad, 2> mu;
};

/// The training objective: per-row-mean factual squared error over the
/// per-arm training blocks, plus lambda_f times the mean squared extractor
/// alignment gap, plus lambda_tau times the mean squared simulated-effect
/// residual over both simulator arms. Exposed so the exact gradients can be
/// validated against finite differences.
class SimponetObjective {
 public:
  SimponetObjective(std::array<Matrix, 2> x_arm, std::array<Vector, 2> y_arm,
                    std::array<Matrix, 2> ztilde_arm, std::array<Matrix, 2> sim_pts,
                    Vector tau_s, double lambda_f, double lambda_tau);

  double loss(const SimponetParams& p) const;
  SimponetGrads grads(const SimponetParams& p) const;

  std::size_t n_train() const { return n_tr_; }

 private:
  std::array<Matrix, 2> x_arm_;
  std::array<Vector, 2> y_arm_;
  std::array<Matrix, 2> ztilde_arm_;
  std::array<Matrix, 2> sim_pts_;
  Vector tau_s_;
  double lambda_f_;
  double lambda_tau_;
  std::size_t n_tr_;
};

/// Trains linear extractors plus one-hidden-layer outcome heads on the
/// factual loss, the extractor alignment regularizer (weight lambda_f) and
/// the simulated-effect regularizer (weight lambda_tau). Full-batch gradient
/// descent with step halving on loss increase; factual validation error is
/// evaluated every eval_every steps and the best checkpoint is returned.
std::pair<CateModel, FitReport> train_simponet_nn(const ObservationalDataset& d_trn,
                                                  const SimulatorDataset& d_syn,
                                                  const EncoderPair& f_tilde,
                                                  const TrainConfig& cfg, Rng& rng);

struct FactualMlpFit {
  Mlp net;
  std::vector<double> loss_trace;
};

/// Plain factual regression y ~ mlp(features); shared building block for the
/// real_only / mu_only / sim_only nonlinear estimators and the lambda_f
/// heuristic reference fits.
FactualMlpFit train_factual_mlp(const Matrix& features, const Vector& y,
                                const TrainConfig& cfg, Rng& rng);

}  // namespace simcate::nn
