#include "simcate/nn_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "simcate/la/kernels.hpp"
#include "simcate/metrics.hpp"

namespace simcate::nn {

void TrainConfig::validate() const {
  if (val_fraction <= 0.0 || val_fraction >= 1.0)
    throw std::invalid_argument("TrainConfig: val_fraction must lie in (0, 1)");
  if (steps == 0 || eval_every == 0 || patience == 0 || hidden == 0)
    throw std::invalid_argument("TrainConfig: counts must be positive");
  if (step_size <= 0.0) throw std::invalid_argument("TrainConfig: step_size <= 0");
  if (lambda_f < 0.0 || lambda_tau < 0.0)
    throw std::invalid_argument("TrainConfig: negative loss weight");
}

StratifiedSplit stratified_split(const std::vector<int>& t, double val_fraction, Rng& rng) {
  StratifiedSplit split;
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t[i] == arm) idx.push_back(i);
    const std::vector<std::size_t> perm = rng.permutation(idx.size());
    const std::size_t n_val = static_cast<std::size_t>(
        std::round(val_fraction * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (k < n_val)
        split.val_idx.push_back(idx[perm[k]]);
      else
        split.train_idx.push_back(idx[perm[k]]);
    }
  }
  std::sort(split.train_idx.begin(), split.train_idx.end());
  std::sort(split.val_idx.begin(), split.val_idx.end());
  return split;
}

double select_lambda_f(const Vector& real_only_val_sq_errors,
                       const Vector& mu_only_val_sq_errors, double alpha) {
  const double p =
      metrics::paired_t_test_one_sided(real_only_val_sq_errors, mu_only_val_sq_errors);
  return p < alpha ? 1e-4 : 1.0;
}

namespace {

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(idx[i], j);
  return out;
}

Vector take(const Vector& v, const std::vector<std::size_t>& idx) {
  Vector out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

constexpr int kMaxHalvings = 40;

}  // namespace

SimponetObjective::SimponetObjective(std::array<Matrix, 2> x_arm, std::array<Vector, 2> y_arm,
                                     std::array<Matrix, 2> ztilde_arm,
                                     std::array<Matrix, 2> sim_pts, Vector tau_s,
                                     double lambda_f, double lambda_tau)
    : x_arm_(std::move(x_arm)),
      y_arm_(std::move(y_arm)),
      ztilde_arm_(std::move(ztilde_arm)),
      sim_pts_(std::move(sim_pts)),
      tau_s_(std::move(tau_s)),
      lambda_f_(lambda_f),
      lambda_tau_(lambda_tau) {
  n_tr_ = x_arm_[0].rows() + x_arm_[1].rows();
  if (x_arm_[0].rows() == 0 || x_arm_[1].rows() == 0)
    throw std::invalid_argument("SimponetObjective: empty treatment arm");
}

double SimponetObjective::loss(const SimponetParams& p) const {
  const double inv_n = 1.0 / static_cast<double>(n_tr_);
  const double inv_2m = 1.0 / static_cast<double>(2 * tau_s_.size());
  double loss = 0.0;
  for (int arm = 0; arm < 2; ++arm) {
    const Matrix z_hat = la::matmul(x_arm_[arm], p.f_hat[arm]);
    const Vector pred = mlp_forward(p.mu[arm], z_hat);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double r = pred[i] - y_arm_[arm][i];
      loss += inv_n * r * r;
    }
    if (lambda_f_ > 0.0)
      for (std::size_t k = 0; k < z_hat.size(); ++k) {
        const double r = z_hat.data()[k] - ztilde_arm_[arm].data()[k];
        loss += lambda_f_ * inv_n * r * r;
      }
  }
  if (lambda_tau_ > 0.0) {
    for (int arm = 0; arm < 2; ++arm) {
      const Vector v1 = mlp_forward(p.mu[1], sim_pts_[arm]);
      const Vector v0 = mlp_forward(p.mu[0], sim_pts_[arm]);
      for (std::size_t i = 0; i < tau_s_.size(); ++i) {
        const double r = (v1[i] - v0[i]) - tau_s_[i];
        loss += lambda_tau_ * inv_2m * r * r;
      }
    }
  }
  return loss;
}

SimponetGrads SimponetObjective::grads(const SimponetParams& p) const {
  const double inv_n = 1.0 / static_cast<double>(n_tr_);
  const double inv_2m = 1.0 / static_cast<double>(2 * tau_s_.size());
  const std::size_t n_x = x_arm_[0].cols();
  const std::size_t n_z = p.f_hat[0].cols();

  SimponetGrads g;
  for (int arm = 0; arm < 2; ++arm) {
    g.f_hat[arm] = Matrix(n_x, n_z);
    g.mu[arm] = MlpGrad::zeros_like(p.mu[arm], 0, false);
  }
  for (int arm = 0; arm < 2; ++arm) {
    const Matrix z_hat = la::matmul(x_arm_[arm], p.f_hat[arm]);
    const Vector pred = mlp_forward(p.mu[arm], z_hat);
    Vector rw(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i)
      rw[i] = 2.0 * inv_n * (pred[i] - y_arm_[arm][i]);
    MlpGrad mg = mlp_gradients(p.mu[arm], z_hat, rw, /*want_input_grads=*/true);
    // Factual path into the extractor, plus the alignment regularizer.
    Matrix dz = std::move(mg.dinput);
    if (lambda_f_ > 0.0)
      for (std::size_t k = 0; k < dz.size(); ++k)
        dz.data()[k] +=
            2.0 * lambda_f_ * inv_n * (z_hat.data()[k] - ztilde_arm_[arm].data()[k]);
    g.f_hat[arm] += la::matmul_at_b(x_arm_[arm], dz);
    mg.dinput = Matrix();
    g.mu[arm].accumulate(mg);
  }
  if (lambda_tau_ > 0.0) {
    for (int arm = 0; arm < 2; ++arm) {
      const Vector v1 = mlp_forward(p.mu[1], sim_pts_[arm]);
      const Vector v0 = mlp_forward(p.mu[0], sim_pts_[arm]);
      Vector rw(tau_s_.size());
      for (std::size_t i = 0; i < tau_s_.size(); ++i)
        rw[i] = 2.0 * lambda_tau_ * inv_2m * ((v1[i] - v0[i]) - tau_s_[i]);
      g.mu[1].accumulate(mlp_gradients(p.mu[1], sim_pts_[arm], rw));
      for (auto& v : rw) v = -v;
      g.mu[0].accumulate(mlp_gradients(p.mu[0], sim_pts_[arm], rw));
    }
  }
  return g;
}

std::pair<CateModel, FitReport> train_simponet_nn(const ObservationalDataset& d_trn,
                                                  const SimulatorDataset& d_syn,
                                                  const EncoderPair& f_tilde,
                                                  const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t n_x = d_trn.x.cols();
  const std::size_t n_z = f_tilde[0].n_z;

  const StratifiedSplit split = stratified_split(d_trn.t, cfg.val_fraction, rng);
  // Per-arm training blocks.
  std::array<Matrix, 2> x_arm;
  std::array<Vector, 2> y_arm;
  std::array<Matrix, 2> ztilde_arm;
  std::size_t n_tr = 0;
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<std::size_t> idx;
    for (std::size_t i : split.train_idx)
      if (d_trn.t[i] == arm) idx.push_back(i);
    if (idx.empty())
      throw std::invalid_argument(
          "train_simponet_nn: empty treatment arm after stratified split");
    x_arm[arm] = take_rows(d_trn.x, idx);
    y_arm[arm] = take(d_trn.y, idx);
    ztilde_arm[arm] = f_tilde[arm].encode(x_arm[arm]);
    n_tr += idx.size();
  }
  for (int arm = 0; arm < 2; ++arm) {
    bool any = false;
    for (std::size_t i : split.val_idx) any = any || d_trn.t[i] == arm;
    if (!any)
      throw std::invalid_argument(
          "train_simponet_nn: empty treatment arm after stratified split");
  }
  const Matrix x_val = take_rows(d_trn.x, split.val_idx);
  std::vector<int> t_val;
  for (std::size_t i : split.val_idx) t_val.push_back(d_trn.t[i]);
  const Vector y_val = take(d_trn.y, split.val_idx);

  // Simulator-side targets: tau^S on the fixed f_tilde latents of both arms.
  const std::size_t m_sim = d_syn.x0.rows();
  std::array<Matrix, 2> sim_pts = {f_tilde[0].encode(d_syn.x0), f_tilde[1].encode(d_syn.x1)};
  Vector tau_s(m_sim);
  for (std::size_t i = 0; i < m_sim; ++i) tau_s[i] = d_syn.y1[i] - d_syn.y0[i];

  SimponetParams params;
  for (int arm = 0; arm < 2; ++arm) {
    params.f_hat[arm] = rng.normal_matrix(n_x, n_z);
    const double s = std::sqrt(1.0 / static_cast<double>(n_x));
    for (auto& v : params.f_hat[arm].data()) v *= s;
    params.mu[arm] = Mlp::init(n_z, cfg.hidden, rng);
  }

  const SimponetObjective objective(x_arm, y_arm, ztilde_arm, sim_pts, tau_s, cfg.lambda_f,
                                    cfg.lambda_tau);
  auto loss_of = [&](const SimponetParams& p) { return objective.loss(p); };
  auto grads_of = [&](const SimponetParams& p) { return objective.grads(p); };

  auto apply = [&](SimponetParams p, const SimponetGrads& g, double lr) {
    for (int arm = 0; arm < 2; ++arm) {
      for (std::size_t k = 0; k < p.f_hat[arm].size(); ++k)
        p.f_hat[arm].data()[k] -= lr * g.f_hat[arm].data()[k];
      apply_gradient(p.mu[arm], g.mu[arm], lr);
    }
    return p;
  };

  auto val_mse = [&](const SimponetParams& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < x_val.rows(); ++i) {
      Matrix xi(1, n_x);
      for (std::size_t j = 0; j < n_x; ++j) xi(0, j) = x_val(i, j);
      const Matrix z_hat = la::matmul(xi, p.f_hat[t_val[i]]);
      const double pred = mlp_forward(p.mu[t_val[i]], z_hat)[0];
      const double r = pred - y_val[i];
      s += r * r;
    }
    return s / static_cast<double>(x_val.rows());
  };

  FitReport report;
  double lr = cfg.step_size;
  double cur_loss = loss_of(params);
  report.objective_trace.push_back(cur_loss);

  SimponetParams best = params;
  double best_val = val_mse(params);
  std::size_t bad_evals = 0;
  bool stopped_early = false;
  bool any_eval = false;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const SimponetGrads g = grads_of(params);
    SimponetParams trial = apply(params, g, lr);
    double trial_loss = loss_of(trial);
    if (!std::isfinite(trial_loss))
      throw std::runtime_error("train_simponet_nn: non-finite loss at step " +
                               std::to_string(step));
    int halvings = 0;
    while (trial_loss > cur_loss && halvings < kMaxHalvings) {
      lr *= 0.5;
      trial = apply(params, g, lr);
      trial_loss = loss_of(trial);
      ++halvings;
    }
    if (trial_loss > cur_loss) break;  // no descent direction at minimal step

    params = std::move(trial);
    cur_loss = trial_loss;
    report.objective_trace.push_back(cur_loss);
    report.sweeps = step + 1;

    if ((step + 1) % cfg.eval_every == 0) {
      any_eval = true;
      const double v = val_mse(params);
      if (v < best_val) {
        best_val = v;
        best = params;
        bad_evals = 0;
      } else if (++bad_evals >= cfg.patience) {
        stopped_early = true;
        break;
      }
    }
  }

  // With no evaluation points the run is a plain fit; return the final state.
  if (!any_eval) {
    best = params;
    best_val = val_mse(params);
  }
  report.converged = stopped_early || report.sweeps == cfg.steps;

  CateModel model;
  model.kind = CateModel::Kind::kSimponet;
  model.head_kind = CateModel::HeadKind::kMlp;
  for (int arm = 0; arm < 2; ++arm) {
    model.f_hat[arm] = Encoder::linear(best.f_hat[arm]);
    model.mu_mlp[arm] = best.mu[arm];
  }
  nlohmann::json meta;
  meta["lambda_f"] = cfg.lambda_f;
  meta["lambda_tau"] = cfg.lambda_tau;
  meta["best_val_mse"] = best_val;
  model.metadata = meta.dump();
  return {std::move(model), std::move(report)};
}

FactualMlpFit train_factual_mlp(const Matrix& features, const Vector& y,
                                const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (features.rows() != y.size() || features.rows() == 0)
    throw std::invalid_argument("train_factual_mlp: feature/label mismatch");
  const double inv_n = 1.0 / static_cast<double>(y.size());

  FactualMlpFit fit;
  fit.net = Mlp::init(features.cols(), cfg.hidden, rng);

  auto loss_of = [&](const Mlp& net) {
    const Vector pred = mlp_forward(net, features);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double r = pred[i] - y[i];
      s += r * r;
    }
    return s * inv_n;
  };

  double lr = cfg.step_size;
  double cur = loss_of(fit.net);
  fit.loss_trace.push_back(cur);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const Vector pred = mlp_forward(fit.net, features);
    Vector rw(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i)
      rw[i] = 2.0 * inv_n * (pred[i] - y[i]);
    const MlpGrad g = mlp_gradients(fit.net, features, rw);

    Mlp trial = fit.net;
    apply_gradient(trial, g, lr);
    double trial_loss = loss_of(trial);
    if (!std::isfinite(trial_loss))
      throw std::runtime_error("train_factual_mlp: non-finite loss at step " +
                               std::to_string(step));
    int halvings = 0;
    while (trial_loss > cur && halvings < kMaxHalvings) {
      lr *= 0.5;
      trial = fit.net;
      apply_gradient(trial, g, lr);
      trial_loss = loss_of(trial);
      ++halvings;
    }
    if (trial_loss > cur) break;
    fit.net = std::move(trial);
    cur = trial_loss;
    fit.loss_trace.push_back(cur);
  }
  return fit;
}

}  // namespace simcate::nn
