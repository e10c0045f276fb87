#pragma once

#include <array>
#include <string>

#include "simcate/la/matrix.hpp"
#include "simcate/rng.hpp"

namespace simcate::dgp {

using la::Matrix;
using la::Vector;

/// Dials controlling real/simulator mismatch.
/// gamma_r: gap between the two real covariate maps; gamma_rs: gap between
/// real and simulator extractors; gamma_tau: gap between the real and
/// simulator effect functions; gamma_w: mixing weight between w_0 and w_1.
struct GapConfig {
  double gamma_r = 0.0;
  double gamma_rs = 0.0;
  double gamma_tau = 0.0;
  double gamma_w = 0.4;

  GapConfig() = default;
  GapConfig(double r, double rs, double tau, double w = 0.4);
};

/// Matched real/simulator linear DGP. Covariates are generated as x = z R_t
/// with R_t the inverse of r_inv[t]; outcomes as y = z . w[t]. The simulator
/// side uses s_inv / w_s. Maps are square (n_x = n_z) and kept invertible by
/// a condition-number gate at construction.
struct LinearDgpPair {
  std::size_t n_z = 0;
  std::array<Matrix, 2> r_inv;  // R_t^{-1}
  std::array<Matrix, 2> s_inv;  // S_t^{-1}
  std::array<Vector, 2> w;      // real outcome heads
  std::array<Vector, 2> w_s;    // simulator outcome heads
  double sigma_y = 0.0;
  double sigma_ys = 0.0;
  double propensity_scale = 0.0;  // logit scale; 0 = randomized assignment

  Vector w_tau() const;    // w[1] - w[0]
  Vector w_tau_s() const;  // w_s[1] - w_s[0]
  Matrix r(int t) const;   // R_t = (R_t^{-1})^{-1}
  Matrix s(int t) const;   // S_t
};

struct ObservationalDataset {
  Matrix x;            // n x n_x
  std::vector<int> t;  // {0,1}
  Vector y;
};

struct SimulatorDataset {
  Matrix x0, x1;  // m x n_x counterfactual pairs sharing a latent per row
  Vector y0, y1;
};

struct EvalDataset {
  Matrix x;
  std::vector<int> t;
  Vector y0, y1;  // true potential outcomes (noiseless)
  Vector tau;     // y1 - y0
  Matrix z;       // ground-truth latents, diagnostics only
};

enum class LatentMode { kGaussian, kSphere };

Matrix sample_latents(std::size_t n, std::size_t n_z, Rng& rng,
                      LatentMode mode = LatentMode::kGaussian);

LinearDgpPair build_linear_pair(const GapConfig& gaps, std::size_t n_z, double sigma_y,
                                double sigma_ys, Rng& rng);

ObservationalDataset generate_observational(const LinearDgpPair& spec, const Matrix& z,
                                            Rng& rng);
SimulatorDataset generate_simulator_cf(const LinearDgpPair& spec, const Matrix& z, Rng& rng);
EvalDataset generate_eval(const LinearDgpPair& spec, const Matrix& z, Rng& rng);

/// Kernel widths for Gaussian-process outcome sampling,
/// k_gamma(z, z') = exp(-gamma^2 ||z - z'||^2 / 2).
struct GpOutcomeSpec {
  double gamma_base = 1.0;     // width for mu_0 and y_0^S
  double gamma_tau_fn = 0.4;   // width for tau
  double gamma_tau_gap = 0.0;  // width of the tau -> tau^S perturbation; 0 skips it
  double jitter = 1e-8;

  GpOutcomeSpec() = default;
  GpOutcomeSpec(double base, double tau_fn, double tau_gap, double jit = 1e-8);
};

/// One joint draw of the outcome functions evaluated at the rows of z_all.
struct GpOutcomeDraw {
  Vector mu0, mu1, tau;     // real: mu1 = mu0 + tau
  Vector y0s, y1s, tau_s;   // simulator: y1s = y0s + tau_s
};

GpOutcomeDraw sample_gp_outcome_functions(const Matrix& z_all, const GpOutcomeSpec& spec,
                                          Rng& rng);

/// Fixed (never trained) coupling flow with alternating half-splits. Each
/// layer transforms one half of the coordinates with scale/shift networks
/// (one hidden layer, width 16, tanh) of the pass-through half; log-scales
/// are clamped to [-2, 2] before exponentiation.
struct CouplingFlow {
  struct Net {
    Matrix w1;  // in x hidden
    Vector b1;
    Matrix w2;  // hidden x out
    Vector b2;
  };
  struct Layer {
    std::size_t split = 0;  // coordinates [0, split) pass through when parity 0
    bool swap = false;      // odd layers exchange pass/transform halves
    Net scale, shift;
  };
  std::size_t n_x = 0;
  std::vector<Layer> layers;
};

CouplingFlow new_coupling_flow(std::size_t n_x, std::size_t n_layers, Rng& rng);
inline CouplingFlow new_coupling_flow(std::size_t n_x, Rng& rng) {
  return new_coupling_flow(n_x, 2, rng);
}
Matrix apply_coupling_flow(const CouplingFlow& flow, const Matrix& z);
Matrix invert_coupling_flow(const CouplingFlow& flow, const Matrix& x);

/// tau_s(z_i) = tau_i + std(tau) * gamma_tau * (z_i . w), w ~ N(0, I).
/// std(tau) is the population standard deviation of the supplied labels.
Vector synthesize_semisynthetic_sim_outcomes(const Vector& tau, const Matrix& z,
                                             double gamma_tau, Rng& rng);

// Dataset CSV emission (17 significant digits). Observational header is
// x_0..x_{d-1},t,y; simulator x0_0..,x1_0..,y0,y1; eval x_0..,t,y0,y1,tau.
void write_observational_csv(const ObservationalDataset& d, const std::string& path);
void write_simulator_csv(const SimulatorDataset& d, const std::string& path);
void write_eval_csv(const EvalDataset& d, const std::string& path);

ObservationalDataset read_observational_csv(const std::string& path);
SimulatorDataset read_simulator_csv(const std::string& path);
EvalDataset read_eval_csv(const std::string& path);  // z left empty

}  // namespace simcate::dgp
