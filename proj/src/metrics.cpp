#include "simcate/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "simcate/la/kernels.hpp"

namespace simcate::metrics {

ErrorSummary cate_error(const Vector& pred, const Vector& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw std::invalid_argument("cate_error: length mismatch or empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    s += d * d;
  }
  ErrorSummary e;
  e.mse = s / static_cast<double>(pred.size());
  e.rmse = std::sqrt(e.mse);
  return e;
}

std::pair<double, Vector> factual_error(const CateModel& model,
                                        const ObservationalDataset& data) {
  const Vector pred = model.predict_factual(data.x, data.t);
  Vector sq(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - data.y[i];
    sq[i] = d * d;
    sum += sq[i];
  }
  return {sum / static_cast<double>(pred.size()), sq};
}

double empirical_distance(DistanceKind kind, const VectorFieldFn& a, const VectorFieldFn& b,
                          const Matrix& probe) {
  if (probe.rows() == 0) throw std::invalid_argument("empirical_distance: empty probe");
  const Matrix va = a(probe);
  const Matrix vb = b(probe);
  if (!va.same_shape(vb))
    throw std::invalid_argument("empirical_distance: function output shapes differ");
  if (va.rows() != probe.rows())
    throw std::invalid_argument("empirical_distance: function output row mismatch");
  if (kind != DistanceKind::kXGivenT && va.cols() != 1)
    throw std::invalid_argument("empirical_distance: scalar kinds need single-column output");
  double s = 0.0;
  for (std::size_t k = 0; k < va.size(); ++k) {
    const double d = va.data()[k] - vb.data()[k];
    s += d * d;
  }
  return s / static_cast<double>(probe.rows());
}

namespace {

// Continued fraction for the regularized incomplete beta (Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;

  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

double reg_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log(1.0 - x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

double student_t_cdf(double t, double df) {
  if (df <= 0.0) throw std::invalid_argument("student_t_cdf: df must be positive");
  const double x = df / (df + t * t);
  const double half_tail = 0.5 * reg_incomplete_beta(0.5 * df, 0.5, x);
  return t >= 0.0 ? 1.0 - half_tail : half_tail;
}

double paired_t_test_one_sided(const Vector& a_sq_errors, const Vector& b_sq_errors) {
  const std::size_t n = a_sq_errors.size();
  if (n != b_sq_errors.size())
    throw std::invalid_argument("paired_t_test_one_sided: length mismatch");
  if (n < 3) throw std::invalid_argument("paired_t_test_one_sided: need at least 3 pairs");

  Vector d(n);
  bool all_zero = true;
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = b_sq_errors[i] - a_sq_errors[i];
    if (d[i] != 0.0) all_zero = false;
    mean += d[i];
  }
  if (all_zero) return 0.5;
  mean /= static_cast<double>(n);

  double var = 0.0;
  for (double v : d) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  const double sd = std::sqrt(var);
  if (sd == 0.0) return mean > 0.0 ? 0.0 : 1.0;

  const double t = mean * std::sqrt(static_cast<double>(n)) / sd;
  return 1.0 - student_t_cdf(t, static_cast<double>(n - 1));
}

std::string BoundReport::to_json_string() const {
  nlohmann::json j;
  j["lhs"] = lhs;
  j["rhs"] = rhs;
  j["margin"] = margin;
  j["k_tau"] = k_tau;
  j["components"] = components;
  return j.dump(2);
}

namespace {

double mean_sq(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

}  // namespace

BoundReport check_decomposition_bound(const CateModel& model, const LinearDgpPair& spec,
                                      const Matrix& probe_z, int t) {
  if (t != 0 && t != 1) throw std::invalid_argument("check_decomposition_bound: bad t");
  const Matrix x = la::matmul(probe_z, spec.r(t));
  const Matrix z_hat = model.f_hat[t].encode(x);
  const Vector pred_t = model.head_values(z_hat, t);
  const Vector pred_o = model.head_values(z_hat, 1 - t);

  const Vector mu_t = la::matvec(probe_z, spec.w[t]);
  const Vector mu_o = la::matvec(probe_z, spec.w[1 - t]);

  const std::size_t m = probe_z.rows();
  Vector cate_true(m), cate_pred(m);
  for (std::size_t i = 0; i < m; ++i) {
    cate_true[i] = t == 1 ? mu_t[i] - mu_o[i] : mu_o[i] - mu_t[i];
    cate_pred[i] = t == 1 ? pred_t[i] - pred_o[i] : pred_o[i] - pred_t[i];
  }

  BoundReport rep;
  const double eps_f = mean_sq(pred_t, mu_t);
  const double eps_cf = mean_sq(pred_o, mu_o);
  rep.lhs = mean_sq(cate_pred, cate_true);
  rep.rhs = 2.0 * eps_f + 2.0 * eps_cf;
  rep.margin = rep.rhs - rep.lhs;
  rep.components = {{"eps_cate", rep.lhs}, {"eps_f", eps_f}, {"eps_cf", eps_cf}};
  // The inequality is a theorem; a violation beyond roundoff is a bug.
  if (rep.margin < -1e-9)
    throw std::logic_error("check_decomposition_bound: inequality violated, margin " +
                           std::to_string(rep.margin));
  return rep;
}

BoundReport check_generalization_bound(const CateModel& model, const LinearDgpPair& spec,
                                       const EncoderPair& f_tilde, const Vector& w_tau_tilde,
                                       const Matrix& probe_z, int t) {
  if (t != 0 && t != 1) throw std::invalid_argument("check_generalization_bound: bad t");
  if (model.head_kind != CateModel::HeadKind::kLinear)
    throw std::invalid_argument(
        "check_generalization_bound: nonlinear heads unsupported (no closed-form "
        "Lipschitz constant)");

  const std::size_t m = probe_z.rows();
  const Matrix x = la::matmul(probe_z, spec.r(t));      // real covariates under t
  const Matrix x_s = la::matmul(probe_z, spec.s(t));    // simulator covariates under t

  // Model pieces.
  const Matrix z_hat = model.f_hat[t].encode(x);
  const Vector pred_t = model.head_values(z_hat, t);
  Vector cate_pred(m);
  {
    const Vector v1 = model.head_values(z_hat, 1);
    const Vector v0 = model.head_values(z_hat, 0);
    for (std::size_t i = 0; i < m; ++i) cate_pred[i] = v1[i] - v0[i];
  }

  // Ground truth on the same probe.
  const Vector mu_t = la::matvec(probe_z, spec.w[t]);
  const Vector tau_true = la::matvec(probe_z, spec.w_tau());
  const Vector tau_sim = la::matvec(probe_z, spec.w_tau_s());

  const double eps_f = mean_sq(pred_t, mu_t);
  const double eps_cate = mean_sq(cate_pred, tau_true);
  const double d_z = mean_sq(tau_true, tau_sim);

  // d_h: model CATE head vs simulator-fitted tau head at f_tilde_t(x^S).
  const Matrix h_pts = f_tilde[t].encode(x_s);
  Vector tau_hat_h(m), tau_tilde_h(m);
  {
    const Vector v1 = model.head_values(h_pts, 1);
    const Vector v0 = model.head_values(h_pts, 0);
    for (std::size_t i = 0; i < m; ++i) tau_hat_h[i] = v1[i] - v0[i];
    tau_tilde_h = la::matvec(h_pts, w_tau_tilde);
  }
  const double d_h = mean_sq(tau_hat_h, tau_tilde_h);

  // d_{x|t}(f_hat, f_tilde) on real covariates.
  const Matrix f_tilde_x = f_tilde[t].encode(x);
  double d_fhat = 0.0;
  for (std::size_t k = 0; k < z_hat.size(); ++k) {
    const double dd = z_hat.data()[k] - f_tilde_x.data()[k];
    d_fhat += dd * dd;
  }
  d_fhat /= static_cast<double>(m);

  // d_{x|t}(f, f^S) between true extractors on real covariates.
  const Matrix true_z = la::matmul(x, spec.r_inv[t]);
  const Matrix sim_z = la::matmul(x, spec.s_inv[t]);
  double d_f = 0.0;
  for (std::size_t k = 0; k < true_z.size(); ++k) {
    const double dd = true_z.data()[k] - sim_z.data()[k];
    d_f += dd * dd;
  }
  d_f /= static_cast<double>(m);

  Vector w_hat_tau(model.mu_linear[1].size());
  for (std::size_t i = 0; i < w_hat_tau.size(); ++i)
    w_hat_tau[i] = model.mu_linear[1][i] - model.mu_linear[0][i];
  const double k_tau = std::max(la::norm2(spec.w_tau()), la::norm2(w_hat_tau));
  const double k2 = k_tau * k_tau;

  BoundReport rep;
  rep.lhs = eps_cate;
  rep.rhs = 8.0 * eps_f + 12.0 * d_h + 12.0 * k2 * d_fhat + 12.0 * d_z + 12.0 * k2 * d_f;
  rep.margin = rep.rhs - rep.lhs;
  rep.k_tau = k_tau;
  rep.components = {{"eps_f", eps_f},   {"d_h", d_h}, {"d_fhat", d_fhat},
                    {"d_z", d_z},       {"d_f", d_f}, {"eps_cate", eps_cate}};
  if (rep.margin < -1e-6 * std::max(1.0, rep.rhs))
    throw std::logic_error("check_generalization_bound: inequality violated, margin " +
                           std::to_string(rep.margin));
  return rep;
}

}  // namespace simcate::metrics
