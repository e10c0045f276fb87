#include "simcate/linear_estimators.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "simcate/la/decomp.hpp"
#include "simcate/la/kernels.hpp"

namespace simcate::linear_estimators {

namespace {

struct ArmData {
  Matrix x;
  Vector y;
};

std::array<ArmData, 2> split_arms(const ObservationalDataset& d) {
  std::array<ArmData, 2> arms;
  for (int t = 0; t < 2; ++t) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < d.t.size(); ++i)
      if (d.t[i] == t) idx.push_back(i);
    arms[t].x = Matrix(idx.size(), d.x.cols());
    arms[t].y.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < d.x.cols(); ++j) arms[t].x(i, j) = d.x(idx[i], j);
      arms[t].y[i] = d.y[idx[i]];
    }
  }
  return arms;
}

Vector arm_ols(const ArmData& arm, int t, const char* who) {
  const std::string what = std::string(who) + " arm t=" + std::to_string(t);
  if (arm.x.rows() < arm.x.cols())
    throw std::runtime_error(what + ": fewer rows than covariate dimensions");
  return la::lstsq_vec(arm.x, arm.y, what.c_str());
}

Matrix linear_extractor_matrix(const Encoder& enc, const char* who) {
  if (enc.kind != Encoder::Kind::kLinear || enc.normalize)
    throw std::invalid_argument(std::string(who) + ": requires plain linear extractors");
  return enc.weight;
}

Vector mat_vec(const Matrix& m, const Vector& v) { return la::matvec(m, v); }

}  // namespace

void AltMinConfig::validate() const {
  if (lambda_f < 1e-8)
    throw std::invalid_argument("AltMinConfig: lambda_f below 1e-8 lower bound");
  if (lambda_tau < 0.0) throw std::invalid_argument("AltMinConfig: negative lambda_tau");
  if (ridge_w < 0.0) throw std::invalid_argument("AltMinConfig: negative ridge_w");
  if (max_sweeps == 0) throw std::invalid_argument("AltMinConfig: max_sweeps == 0");
  if (rel_tol < 0.0) throw std::invalid_argument("AltMinConfig: negative rel_tol");
}

CateModel fit_real_only_linear(const ObservationalDataset& d_trn) {
  const auto arms = split_arms(d_trn);
  CateModel m;
  m.kind = CateModel::Kind::kRealOnly;
  m.head_kind = CateModel::HeadKind::kLinear;
  for (int t = 0; t < 2; ++t) {
    m.f_hat[t] = Encoder::identity(d_trn.x.cols());
    m.mu_linear[t] = arm_ols(arms[t], t, "fit_real_only_linear");
  }
  return m;
}

CateModel fit_mu_only_linear(const ObservationalDataset& d_trn, const EncoderPair& f_tilde) {
  const auto arms = split_arms(d_trn);
  CateModel m;
  m.kind = CateModel::Kind::kMuOnly;
  m.head_kind = CateModel::HeadKind::kLinear;
  m.f_hat = f_tilde;
  for (int t = 0; t < 2; ++t) {
    const Matrix z_hat = f_tilde[t].encode(arms[t].x);
    const std::string what = "fit_mu_only_linear arm t=" + std::to_string(t);
    if (z_hat.rows() < z_hat.cols())
      throw std::runtime_error(what + ": fewer rows than latent dimensions");
    m.mu_linear[t] = la::lstsq_vec(z_hat, arms[t].y, what.c_str());
  }
  return m;
}

CateModel fit_sim_only_linear(const SimulatorDataset& d_syn, const EncoderPair& f_tilde) {
  const Matrix z_tilde = f_tilde[0].encode(d_syn.x0);
  if (z_tilde.rows() < z_tilde.cols())
    throw std::runtime_error("fit_sim_only_linear: fewer simulator pairs than latent dims");
  Vector dy(d_syn.y0.size());
  for (std::size_t i = 0; i < dy.size(); ++i) dy[i] = d_syn.y1[i] - d_syn.y0[i];
  const Vector w_tau_s = la::lstsq_vec(z_tilde, dy, "fit_sim_only_linear");

  CateModel m;
  m.kind = CateModel::Kind::kSimOnly;
  m.head_kind = CateModel::HeadKind::kLinear;
  m.f_hat = f_tilde;
  m.mu_linear[0].assign(w_tau_s.size(), 0.0);
  m.mu_linear[1] = w_tau_s;
  return m;
}

std::pair<CateModel, FitReport> fit_simponet_linear(const ObservationalDataset& d_trn,
                                                    const SimulatorDataset& d_syn,
                                                    const EncoderPair& f_tilde,
                                                    const AltMinConfig& cfg) {
  cfg.validate();
  if (d_trn.x.rows() == 0 || d_syn.x0.rows() == 0)
    throw std::invalid_argument("fit_simponet_linear: empty dataset");

  const auto arms = split_arms(d_trn);
  const std::size_t n_x = d_trn.x.cols();
  std::array<Matrix, 2> f_mat;
  for (int t = 0; t < 2; ++t)
    f_mat[t] = linear_extractor_matrix(f_tilde[t], "fit_simponet_linear");
  const std::size_t n_z = f_mat[0].cols();

  // Constant pieces: per-arm pseudoinverse responses and the simulator gram.
  std::array<Vector, 2> xdag_y;
  for (int t = 0; t < 2; ++t)
    xdag_y[t] = arm_ols(arms[t], t, "fit_simponet_linear");
  const Matrix z_s = f_tilde[0].encode(d_syn.x0);
  const Matrix g_s = la::gram(z_s);
  Vector tau_s(d_syn.y0.size());
  for (std::size_t i = 0; i < tau_s.size(); ++i) tau_s[i] = d_syn.y1[i] - d_syn.y0[i];
  const Vector zs_tau = la::matvec_t(z_s, tau_s);

  // Initialization: extractors at f_tilde, heads from the mu_only fit.
  std::array<Matrix, 2> r_hat = f_mat;
  std::array<Vector, 2> w_hat;
  {
    const CateModel mu_only = fit_mu_only_linear(d_trn, f_tilde);
    w_hat = mu_only.mu_linear;
  }

  auto objective = [&]() {
    double obj = 0.0;
    for (int t = 0; t < 2; ++t) {
      const Matrix z_hat = la::matmul(arms[t].x, r_hat[t]);
      const Vector pred = la::matvec(z_hat, w_hat[t]);
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = pred[i] - arms[t].y[i];
        obj += r * r;
      }
      const Matrix diff = la::matmul(arms[t].x, r_hat[t] - f_mat[t]);
      for (double v : diff.data()) obj += cfg.lambda_f * v * v;
    }
    Vector dw(n_z);
    for (std::size_t i = 0; i < n_z; ++i) dw[i] = w_hat[1][i] - w_hat[0][i];
    const Vector zs_dw = la::matvec(z_s, dw);
    for (std::size_t i = 0; i < zs_dw.size(); ++i) {
      const double r = zs_dw[i] - tau_s[i];
      obj += cfg.lambda_tau * r * r;
    }
    if (cfg.ridge_w > 0.0)
      for (int t = 0; t < 2; ++t)
        for (double v : w_hat[t]) obj += cfg.ridge_w * v * v;
    return obj;
  };

  FitReport report;
  report.objective_trace.push_back(objective());

  for (std::size_t sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    // Extractor updates: Rhat_t <- (X^dag y w^T + lambda_f Ftilde) (w w^T + lambda_f I)^{-1}.
    for (int t = 0; t < 2; ++t) {
      Matrix lhs(n_x, n_z);
      for (std::size_t i = 0; i < n_x; ++i)
        for (std::size_t j = 0; j < n_z; ++j)
          lhs(i, j) = xdag_y[t][i] * w_hat[t][j] + cfg.lambda_f * f_mat[t](i, j);
      Matrix ww(n_z, n_z);
      for (std::size_t i = 0; i < n_z; ++i)
        for (std::size_t j = 0; j < n_z; ++j) ww(i, j) = w_hat[t][i] * w_hat[t][j];
      for (std::size_t i = 0; i < n_z; ++i) ww(i, i) += cfg.lambda_f;
      r_hat[t] = la::matmul(lhs, la::inverse(ww));
    }

    // Head updates with the tau regularizer sign matched per treatment.
    for (int t = 0; t < 2; ++t) {
      const int other = 1 - t;
      const double sign = t == 1 ? 1.0 : -1.0;
      const Matrix z_hat = la::matmul(arms[t].x, r_hat[t]);
      Matrix m = la::gram(z_hat);
      for (std::size_t i = 0; i < n_z; ++i)
        for (std::size_t j = 0; j < n_z; ++j) m(i, j) += cfg.lambda_tau * g_s(i, j);
      if (cfg.ridge_w > 0.0)
        for (std::size_t i = 0; i < n_z; ++i) m(i, i) += cfg.ridge_w;

      Vector rhs = la::matvec_t(z_hat, arms[t].y);
      const Vector gs_w = la::matvec(g_s, w_hat[other]);
      for (std::size_t i = 0; i < n_z; ++i)
        rhs[i] += cfg.lambda_tau * (gs_w[i] + sign * zs_tau[i]);

      Matrix l;
      if (!la::cholesky(m, l))
        throw std::runtime_error(
            "fit_simponet_linear: singular head update (rank-deficient latents with "
            "lambda_tau = 0)");
      w_hat[t] = la::cholesky_solve(l, rhs);
    }

    const double obj = objective();
    const double prev = report.objective_trace.back();
    report.objective_trace.push_back(obj);
    report.sweeps = sweep + 1;
    if (std::fabs(prev - obj) <= cfg.rel_tol * std::max(1.0, std::fabs(prev))) {
      report.converged = true;
      break;
    }
  }

  CateModel model;
  model.kind = CateModel::Kind::kSimponet;
  model.head_kind = CateModel::HeadKind::kLinear;
  for (int t = 0; t < 2; ++t) {
    model.f_hat[t] = Encoder::linear(r_hat[t]);
    model.mu_linear[t] = w_hat[t];
  }
  nlohmann::json meta;
  meta["lambda_f"] = cfg.lambda_f;
  meta["lambda_tau"] = cfg.lambda_tau;
  meta["ridge_w"] = cfg.ridge_w;
  model.metadata = meta.dump();
  return {std::move(model), std::move(report)};
}

double analytic_cate_error(const LinearDgpPair& spec, const Vector& x_star, int t,
                           CateModel::Kind method) {
  if (t != 0 && t != 1) throw std::invalid_argument("analytic_cate_error: t must be 0 or 1");
  if (x_star.size() != spec.n_z)
    throw std::invalid_argument("analytic_cate_error: covariate dimension mismatch");
  const int o = 1 - t;

  Vector v;
  switch (method) {
    case CateModel::Kind::kSimOnly: {
      const Vector a = mat_vec(spec.r_inv[t], spec.w_tau());
      const Vector b = mat_vec(spec.s_inv[t], spec.w_tau_s());
      v.resize(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i] - b[i];
      break;
    }
    case CateModel::Kind::kRealOnly: {
      const Matrix diff = spec.r_inv[o] - spec.r_inv[t];
      v = mat_vec(diff, spec.w[o]);
      break;
    }
    case CateModel::Kind::kMuOnly: {
      const Matrix cross = la::matmul(spec.s_inv[t], la::matmul(spec.s(o), spec.r_inv[o]));
      const Matrix diff = spec.r_inv[t] - cross;
      v = mat_vec(diff, spec.w[o]);
      break;
    }
    case CateModel::Kind::kSimponet:
      throw std::invalid_argument(
          "analytic_cate_error: simponet has no closed-form error expression");
  }
  const double e = la::dot(x_star, v);
  return e * e;
}

Vector predict_cate(const CateModel& model, const Matrix& x, const std::vector<int>& t) {
  return model.predict_cate(x, t);
}

}  // namespace simcate::linear_estimators
