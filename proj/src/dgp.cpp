#include "simcate/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "simcate/la/decomp.hpp"
#include "simcate/la/kernels.hpp"

namespace simcate::dgp {

namespace {

constexpr double kCondGate = 1e8;
constexpr int kMaxResamples = 20;

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Fixed unit propensity direction: normalized all-ones.
Vector propensity_direction(std::size_t n_z) {
  Vector w(n_z, 1.0 / std::sqrt(static_cast<double>(n_z)));
  return w;
}

}  // namespace

GapConfig::GapConfig(double r, double rs, double tau, double w)
    : gamma_r(r), gamma_rs(rs), gamma_tau(tau), gamma_w(w) {
  require(r >= 0.0 && r <= 0.5, "GapConfig: gamma_r outside [0, 0.5]");
  require(rs >= 0.0 && rs <= 0.5, "GapConfig: gamma_rs outside [0, 0.5]");
  require(tau >= 0.0 && tau <= 1.0, "GapConfig: gamma_tau outside [0, 1]");
  require(w >= 0.0 && w <= 1.0, "GapConfig: gamma_w outside [0, 1]");
}

Vector LinearDgpPair::w_tau() const {
  Vector v(n_z);
  for (std::size_t i = 0; i < n_z; ++i) v[i] = w[1][i] - w[0][i];
  return v;
}

Vector LinearDgpPair::w_tau_s() const {
  Vector v(n_z);
  for (std::size_t i = 0; i < n_z; ++i) v[i] = w_s[1][i] - w_s[0][i];
  return v;
}

Matrix LinearDgpPair::r(int t) const { return la::inverse(r_inv[t]); }
Matrix LinearDgpPair::s(int t) const { return la::inverse(s_inv[t]); }

Matrix sample_latents(std::size_t n, std::size_t n_z, Rng& rng, LatentMode mode) {
  require(n >= 1, "sample_latents: n must be positive");
  require(n_z >= 1, "sample_latents: n_z must be positive");
  Matrix z = rng.normal_matrix(n, n_z);
  if (mode == LatentMode::kSphere) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n_z; ++j) s += z(i, j) * z(i, j);
      s = std::sqrt(s);
      while (s == 0.0) {  // astronomically unlikely; resample the row
        for (std::size_t j = 0; j < n_z; ++j) z(i, j) = rng.normal();
        s = 0.0;
        for (std::size_t j = 0; j < n_z; ++j) s += z(i, j) * z(i, j);
        s = std::sqrt(s);
      }
      for (std::size_t j = 0; j < n_z; ++j) z(i, j) /= s;
    }
  }
  return z;
}

LinearDgpPair build_linear_pair(const GapConfig& gaps, std::size_t n_z, double sigma_y,
                                double sigma_ys, Rng& rng) {
  require(n_z >= 1, "build_linear_pair: n_z must be positive");
  require(sigma_y >= 0.0 && sigma_ys >= 0.0, "build_linear_pair: negative noise scale");

  for (int attempt = 0; attempt <= kMaxResamples; ++attempt) {
    LinearDgpPair p;
    p.n_z = n_z;
    p.sigma_y = sigma_y;
    p.sigma_ys = sigma_ys;

    p.r_inv[0] = rng.normal_matrix(n_z, n_z);
    Matrix noise_r = rng.normal_matrix(n_z, n_z);
    p.r_inv[1] = (1.0 - gaps.gamma_r) * p.r_inv[0] + gaps.gamma_r * noise_r;

    p.w[0] = rng.normal_vector(n_z);
    Vector noise_w = rng.normal_vector(n_z);
    p.w[1].resize(n_z);
    for (std::size_t i = 0; i < n_z; ++i)
      p.w[1][i] = gaps.gamma_w * p.w[0][i] + (1.0 - gaps.gamma_w) * noise_w[i];

    for (int t = 0; t < 2; ++t) {
      Matrix noise_s = rng.normal_matrix(n_z, n_z);
      p.s_inv[t] = (1.0 - gaps.gamma_rs) * p.r_inv[t] + gaps.gamma_rs * noise_s;
    }

    Vector w_tau = p.w_tau();
    Vector noise_t = rng.normal_vector(n_z);
    Vector w_tau_s(n_z);
    for (std::size_t i = 0; i < n_z; ++i)
      w_tau_s[i] = (1.0 - gaps.gamma_tau) * w_tau[i] + gaps.gamma_tau * noise_t[i];

    // The simulator shares the t=0 head, so the pair differs from the real
    // DGP exactly by the tau gap.
    p.w_s[0] = p.w[0];
    p.w_s[1].resize(n_z);
    for (std::size_t i = 0; i < n_z; ++i) p.w_s[1][i] = p.w_s[0][i] + w_tau_s[i];

    bool ok = true;
    for (int t = 0; t < 2 && ok; ++t)
      ok = la::cond_spectral(p.r_inv[t]) < kCondGate && la::cond_spectral(p.s_inv[t]) < kCondGate;
    if (ok) return p;
  }
  throw std::runtime_error("build_linear_pair: repeated ill-conditioned draws (>20 resamples)");
}

ObservationalDataset generate_observational(const LinearDgpPair& spec, const Matrix& z,
                                            Rng& rng) {
  require(z.cols() == spec.n_z, "generate_observational: latent dimension mismatch");
  const std::size_t n = z.rows();
  const Vector w_p = propensity_direction(spec.n_z);

  ObservationalDataset d;
  d.t.resize(n);
  std::size_t treated = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double logit = spec.propensity_scale * la::dot(z.row(i), w_p);
    d.t[i] = rng.bernoulli(sigmoid(logit)) ? 1 : 0;
    treated += d.t[i];
  }
  if (treated == 0 || treated == n)
    throw std::runtime_error("generate_observational: empty treatment arm, resample latents");

  const Matrix r0 = spec.r(0);
  const Matrix r1 = spec.r(1);
  d.x = Matrix(n, spec.n_z);
  d.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix& rt = d.t[i] == 0 ? r0 : r1;
    const Vector zi = z.row(i);
    for (std::size_t j = 0; j < spec.n_z; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < spec.n_z; ++k) s += zi[k] * rt(k, j);
      d.x(i, j) = s;
    }
    d.y[i] = la::dot(zi, spec.w[d.t[i]]);
  }
  if (spec.sigma_y > 0.0)
    for (std::size_t i = 0; i < n; ++i) d.y[i] += spec.sigma_y * rng.normal();
  return d;
}

SimulatorDataset generate_simulator_cf(const LinearDgpPair& spec, const Matrix& z, Rng& rng) {
  require(z.cols() == spec.n_z, "generate_simulator_cf: latent dimension mismatch");
  const std::size_t m = z.rows();
  SimulatorDataset d;
  d.x0 = la::matmul(z, spec.s(0));
  d.x1 = la::matmul(z, spec.s(1));
  d.y0.resize(m);
  d.y1.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Vector zi = z.row(i);
    d.y0[i] = la::dot(zi, spec.w_s[0]);
    d.y1[i] = la::dot(zi, spec.w_s[1]);
  }
  if (spec.sigma_ys > 0.0) {
    for (std::size_t i = 0; i < m; ++i) d.y0[i] += spec.sigma_ys * rng.normal();
    for (std::size_t i = 0; i < m; ++i) d.y1[i] += spec.sigma_ys * rng.normal();
  }
  return d;
}

EvalDataset generate_eval(const LinearDgpPair& spec, const Matrix& z, Rng& rng) {
  require(z.cols() == spec.n_z, "generate_eval: latent dimension mismatch");
  const std::size_t m = z.rows();
  EvalDataset d;
  d.z = z;
  d.t.resize(m);
  for (std::size_t i = 0; i < m; ++i) d.t[i] = rng.bernoulli(0.5) ? 1 : 0;

  const Matrix r0 = spec.r(0);
  const Matrix r1 = spec.r(1);
  d.x = Matrix(m, spec.n_z);
  d.y0.resize(m);
  d.y1.resize(m);
  d.tau.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Matrix& rt = d.t[i] == 0 ? r0 : r1;
    const Vector zi = z.row(i);
    for (std::size_t j = 0; j < spec.n_z; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < spec.n_z; ++k) s += zi[k] * rt(k, j);
      d.x(i, j) = s;
    }
    d.y0[i] = la::dot(zi, spec.w[0]);
    d.y1[i] = la::dot(zi, spec.w[1]);
    d.tau[i] = d.y1[i] - d.y0[i];
  }
  return d;
}

GpOutcomeSpec::GpOutcomeSpec(double base, double tau_fn, double tau_gap, double jit)
    : gamma_base(base), gamma_tau_fn(tau_fn), gamma_tau_gap(tau_gap), jitter(jit) {
  require(base > 0.0, "GpOutcomeSpec: gamma_base must be positive");
  require(tau_fn > 0.0, "GpOutcomeSpec: gamma_tau_fn must be positive");
  require(tau_gap >= 0.0, "GpOutcomeSpec: gamma_tau_gap must be nonnegative");
}

namespace {

// Lower Cholesky factor of K(gamma) + jitter*I with jitter escalation.
Matrix gp_chol(const Matrix& z, double gamma, double jitter0) {
  const Matrix k = la::rbf_kernel(z, gamma);
  for (double jitter = jitter0; jitter <= 1e-4; jitter *= 10.0) {
    Matrix kj = k;
    for (std::size_t i = 0; i < kj.rows(); ++i) kj(i, i) += jitter;
    Matrix l;
    if (la::cholesky(kj, l)) return l;
  }
  throw std::runtime_error("sample_gp_outcome_functions: Cholesky failed up to jitter 1e-4");
}

Vector gp_draw(const Matrix& l, Rng& rng) {
  return la::matvec(l, rng.normal_vector(l.rows()));
}

}  // namespace

GpOutcomeDraw sample_gp_outcome_functions(const Matrix& z_all, const GpOutcomeSpec& spec,
                                          Rng& rng) {
  require(z_all.rows() >= 1, "sample_gp_outcome_functions: empty latent matrix");
  const std::size_t n = z_all.rows();

  const Matrix l_tau = gp_chol(z_all, spec.gamma_tau_fn, spec.jitter);
  const Matrix l_base = gp_chol(z_all, spec.gamma_base, spec.jitter);

  GpOutcomeDraw out;
  out.tau = gp_draw(l_tau, rng);
  out.mu0 = gp_draw(l_base, rng);
  out.mu1.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.mu1[i] = out.mu0[i] + out.tau[i];

  out.tau_s = out.tau;
  if (spec.gamma_tau_gap > 0.0) {
    const Matrix l_gap = gp_chol(z_all, spec.gamma_tau_gap, spec.jitter);
    const Vector bump = gp_draw(l_gap, rng);
    for (std::size_t i = 0; i < n; ++i) out.tau_s[i] += bump[i];
  }

  out.y0s = gp_draw(l_base, rng);
  out.y1s.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.y1s[i] = out.y0s[i] + out.tau_s[i];
  return out;
}

namespace {

constexpr std::size_t kFlowHidden = 16;
constexpr double kFlowWeightStd = 0.1;
constexpr double kLogScaleClamp = 2.0;

CouplingFlow::Net random_net(std::size_t in, std::size_t out, Rng& rng) {
  CouplingFlow::Net net;
  net.w1 = rng.normal_matrix(in, kFlowHidden);
  net.b1 = rng.normal_vector(kFlowHidden);
  net.w2 = rng.normal_matrix(kFlowHidden, out);
  net.b2 = rng.normal_vector(out);
  for (auto& v : net.w1.data()) v *= kFlowWeightStd;
  for (auto& v : net.b1) v *= kFlowWeightStd;
  for (auto& v : net.w2.data()) v *= kFlowWeightStd;
  for (auto& v : net.b2) v *= kFlowWeightStd;
  return net;
}

Vector net_eval(const CouplingFlow::Net& net, const Vector& u) {
  Vector h(net.b1.size());
  for (std::size_t j = 0; j < h.size(); ++j) {
    double s = net.b1[j];
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * net.w1(i, j);
    h[j] = std::tanh(s);
  }
  Vector o(net.b2.size());
  for (std::size_t j = 0; j < o.size(); ++j) {
    double s = net.b2[j];
    for (std::size_t i = 0; i < h.size(); ++i) s += h[i] * net.w2(i, j);
    o[j] = s;
  }
  return o;
}

double clamp_log_scale(double s) {
  return std::min(kLogScaleClamp, std::max(-kLogScaleClamp, s));
}

}  // namespace

CouplingFlow new_coupling_flow(std::size_t n_x, std::size_t n_layers, Rng& rng) {
  require(n_x >= 2, "new_coupling_flow: dimension must be at least 2");
  require(n_layers >= 1, "new_coupling_flow: need at least one layer");
  CouplingFlow flow;
  flow.n_x = n_x;
  const std::size_t split = n_x / 2;
  for (std::size_t l = 0; l < n_layers; ++l) {
    CouplingFlow::Layer layer;
    layer.split = split;
    layer.swap = (l % 2) == 1;
    const std::size_t pass = layer.swap ? n_x - split : split;
    const std::size_t txf = n_x - pass;
    layer.scale = random_net(pass, txf, rng);
    layer.shift = random_net(pass, txf, rng);
    flow.layers.push_back(std::move(layer));
  }
  return flow;
}

namespace {

// Index sets for one layer: pass-through coordinates and transformed ones.
void layer_indices(const CouplingFlow::Layer& layer, std::size_t n_x,
                   std::vector<std::size_t>& pass, std::vector<std::size_t>& txf) {
  pass.clear();
  txf.clear();
  for (std::size_t j = 0; j < n_x; ++j) {
    const bool first_half = j < layer.split;
    if (first_half != layer.swap)
      pass.push_back(j);
    else
      txf.push_back(j);
  }
}

}  // namespace

Matrix apply_coupling_flow(const CouplingFlow& flow, const Matrix& z) {
  require(z.cols() == flow.n_x, "apply_coupling_flow: dimension mismatch");
  Matrix out = z;
  std::vector<std::size_t> pass, txf;
  for (const auto& layer : flow.layers) {
    layer_indices(layer, flow.n_x, pass, txf);
    for (std::size_t i = 0; i < out.rows(); ++i) {
      Vector u(pass.size());
      for (std::size_t k = 0; k < pass.size(); ++k) u[k] = out(i, pass[k]);
      const Vector s = net_eval(layer.scale, u);
      const Vector t = net_eval(layer.shift, u);
      for (std::size_t k = 0; k < txf.size(); ++k) {
        const double sc = std::exp(clamp_log_scale(s[k]));
        out(i, txf[k]) = out(i, txf[k]) * sc + t[k];
      }
    }
  }
  return out;
}

Matrix invert_coupling_flow(const CouplingFlow& flow, const Matrix& x) {
  require(x.cols() == flow.n_x, "invert_coupling_flow: dimension mismatch");
  Matrix out = x;
  std::vector<std::size_t> pass, txf;
  for (auto it = flow.layers.rbegin(); it != flow.layers.rend(); ++it) {
    layer_indices(*it, flow.n_x, pass, txf);
    for (std::size_t i = 0; i < out.rows(); ++i) {
      Vector u(pass.size());
      for (std::size_t k = 0; k < pass.size(); ++k) u[k] = out(i, pass[k]);
      const Vector s = net_eval(it->scale, u);
      const Vector t = net_eval(it->shift, u);
      for (std::size_t k = 0; k < txf.size(); ++k) {
        const double sc = std::exp(-clamp_log_scale(s[k]));
        out(i, txf[k]) = (out(i, txf[k]) - t[k]) * sc;
      }
    }
  }
  return out;
}

Vector synthesize_semisynthetic_sim_outcomes(const Vector& tau, const Matrix& z,
                                             double gamma_tau, Rng& rng) {
  require(tau.size() == z.rows(), "synthesize_semisynthetic_sim_outcomes: row mismatch");
  const std::size_t n = tau.size();
  const Vector w = rng.normal_vector(z.cols());

  double mean = 0.0;
  for (double v : tau) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : tau) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));

  Vector out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = tau[i] + sd * gamma_tau * la::dot(z.row(i), w);
  return out;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  return f;
}

}  // namespace

void write_observational_csv(const ObservationalDataset& d, const std::string& path) {
  auto f = open_out(path);
  for (std::size_t j = 0; j < d.x.cols(); ++j) f << "x_" << j << ",";
  f << "t,y\n";
  for (std::size_t i = 0; i < d.x.rows(); ++i) {
    for (std::size_t j = 0; j < d.x.cols(); ++j) f << fmt17(d.x(i, j)) << ",";
    f << d.t[i] << "," << fmt17(d.y[i]) << "\n";
  }
}

void write_simulator_csv(const SimulatorDataset& d, const std::string& path) {
  auto f = open_out(path);
  for (std::size_t j = 0; j < d.x0.cols(); ++j) f << "x0_" << j << ",";
  for (std::size_t j = 0; j < d.x1.cols(); ++j) f << "x1_" << j << ",";
  f << "y0,y1\n";
  for (std::size_t i = 0; i < d.x0.rows(); ++i) {
    for (std::size_t j = 0; j < d.x0.cols(); ++j) f << fmt17(d.x0(i, j)) << ",";
    for (std::size_t j = 0; j < d.x1.cols(); ++j) f << fmt17(d.x1(i, j)) << ",";
    f << fmt17(d.y0[i]) << "," << fmt17(d.y1[i]) << "\n";
  }
}

void write_eval_csv(const EvalDataset& d, const std::string& path) {
  auto f = open_out(path);
  for (std::size_t j = 0; j < d.x.cols(); ++j) f << "x_" << j << ",";
  f << "t,y0,y1,tau\n";
  for (std::size_t i = 0; i < d.x.rows(); ++i) {
    for (std::size_t j = 0; j < d.x.cols(); ++j) f << fmt17(d.x(i, j)) << ",";
    f << d.t[i] << "," << fmt17(d.y0[i]) << "," << fmt17(d.y1[i]) << ","
      << fmt17(d.tau[i]) << "\n";
  }
}

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<Vector> rows;

  std::size_t col(const std::string& name, const std::string& path) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::runtime_error(path + ": missing column " + name);
  }
  std::size_t count_prefix(const std::string& prefix) const {
    std::size_t n = 0;
    for (const auto& h : header)
      if (h.rfind(prefix, 0) == 0) ++n;
    return n;
  }
};

CsvTable read_numeric_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(path + ": empty file");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    Vector row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error(path + ": non-numeric cell at row " +
                                 std::to_string(line_no));
      }
    }
    if (row.size() != table.header.size())
      throw std::runtime_error(path + ": ragged row " + std::to_string(line_no));
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace

ObservationalDataset read_observational_csv(const std::string& path) {
  const CsvTable tab = read_numeric_csv(path);
  const std::size_t d = tab.count_prefix("x_");
  const std::size_t ct = tab.col("t", path), cy = tab.col("y", path);
  ObservationalDataset out;
  out.x = Matrix(tab.rows.size(), d);
  out.t.resize(tab.rows.size());
  out.y.resize(tab.rows.size());
  for (std::size_t i = 0; i < tab.rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) out.x(i, j) = tab.rows[i][j];
    out.t[i] = tab.rows[i][ct] != 0.0 ? 1 : 0;
    out.y[i] = tab.rows[i][cy];
  }
  return out;
}

SimulatorDataset read_simulator_csv(const std::string& path) {
  const CsvTable tab = read_numeric_csv(path);
  const std::size_t d = tab.count_prefix("x0_");
  const std::size_t c0 = tab.col("y0", path), c1 = tab.col("y1", path);
  SimulatorDataset out;
  out.x0 = Matrix(tab.rows.size(), d);
  out.x1 = Matrix(tab.rows.size(), d);
  out.y0.resize(tab.rows.size());
  out.y1.resize(tab.rows.size());
  for (std::size_t i = 0; i < tab.rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      out.x0(i, j) = tab.rows[i][j];
      out.x1(i, j) = tab.rows[i][d + j];
    }
    out.y0[i] = tab.rows[i][c0];
    out.y1[i] = tab.rows[i][c1];
  }
  return out;
}

EvalDataset read_eval_csv(const std::string& path) {
  const CsvTable tab = read_numeric_csv(path);
  const std::size_t d = tab.count_prefix("x_");
  const std::size_t ct = tab.col("t", path), c0 = tab.col("y0", path),
                    c1 = tab.col("y1", path), ctau = tab.col("tau", path);
  EvalDataset out;
  out.x = Matrix(tab.rows.size(), d);
  out.t.resize(tab.rows.size());
  out.y0.resize(tab.rows.size());
  out.y1.resize(tab.rows.size());
  out.tau.resize(tab.rows.size());
  for (std::size_t i = 0; i < tab.rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) out.x(i, j) = tab.rows[i][j];
    out.t[i] = tab.rows[i][ct] != 0.0 ? 1 : 0;
    out.y0[i] = tab.rows[i][c0];
    out.y1[i] = tab.rows[i][c1];
    out.tau[i] = tab.rows[i][ctau];
  }
  return out;
}

}  // namespace simcate::dgp
