#include "simcate/contrastive.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "simcate/la/decomp.hpp"
#include "simcate/la/kernels.hpp"

namespace simcate::contrastive {

namespace {

constexpr double kCosineEps = 1e-12;

Matrix slice_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(idx[i], j);
  return out;
}

}  // namespace

void ContrastiveConfig::validate() const {
  if (temperature <= 0.0) throw std::invalid_argument("ContrastiveConfig: temperature <= 0");
  if (steps == 0) throw std::invalid_argument("ContrastiveConfig: steps == 0");
  if (step_size <= 0.0) throw std::invalid_argument("ContrastiveConfig: step_size <= 0");
  if (plateau_patience == 0)
    throw std::invalid_argument("ContrastiveConfig: plateau_patience == 0");
}

InfoNceResult infonce_loss(const Encoder& enc0, const Encoder& enc1, const Matrix& x0,
                           const Matrix& x1, double temperature) {
  const std::size_t k = x0.rows();
  if (k != x1.rows()) throw std::invalid_argument("infonce_loss: pair count mismatch");
  if (k < 2) throw std::invalid_argument("infonce_loss: need at least 2 pairs");
  if (temperature <= 0.0) throw std::invalid_argument("infonce_loss: temperature <= 0");

  const std::size_t n = 2 * k;
  Matrix e = la::vstack(enc0.encode_raw(x0), enc1.encode_raw(x1));
  const Vector norms = la::row_norms(e);
  for (double v : norms)
    if (!(v > kCosineEps)) throw std::runtime_error("infonce_loss: zero-norm embedding");

  const Matrix c = la::pairwise_cosine(e, kCosineEps);

  // Per-anchor losses and softmax gradients w.r.t. the cosine matrix.
  // Anchor a = t*k + i; positive is the same row under the other treatment;
  // the denominator runs over the positive and every other-row embedding.
  Matrix g(n, n);
  Vector per_anchor(n, 0.0);
  const double inv_t = 1.0 / temperature;
  const std::int64_t n_i64 = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (n > 128)
  for (std::int64_t a_i = 0; a_i < n_i64; ++a_i) {
    const std::size_t a = static_cast<std::size_t>(a_i);
    const std::size_t row = a % k;
    const std::size_t pos = a < k ? a + k : a - k;
    const double* ca = c.row_ptr(a);
    double* ga = g.row_ptr(a);

    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < n; ++b) {
      if (b % k == row && b != pos) continue;
      max_logit = std::max(max_logit, ca[b] * inv_t);
    }
    // Shifted exponentials land in the gradient row and are normalized in
    // place, so each pair costs a single exp.
    double denom = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      if (b % k == row && b != pos) continue;
      ga[b] = std::exp(ca[b] * inv_t - max_logit);
      denom += ga[b];
    }
    per_anchor[a] = std::log(denom) + max_logit - ca[pos] * inv_t;

    const double scale = inv_t / (static_cast<double>(n) * denom);
    for (std::size_t b = 0; b < n; ++b) {
      if (b % k == row && b != pos) continue;
      ga[b] *= scale;
    }
    ga[pos] -= inv_t / static_cast<double>(n);
  }

  double loss = 0.0;
  for (double v : per_anchor) loss += v;
  loss /= static_cast<double>(n);

  // d loss / d embeddings through the cosine: with u_a = e_a/|e_a|,
  // dL/dU = (G + G^T) U and dL/de_a = (dL/du_a - (dL/du_a . u_a) u_a)/|e_a|.
  Matrix u(n, e.cols());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < e.cols(); ++j) u(i, j) = e(i, j) / norms[i];
  Matrix du = la::matmul(g, u);
  du += la::matmul_at_b(g, u);
  Matrix de(n, e.cols());
  for (std::size_t i = 0; i < n; ++i) {
    double proj = 0.0;
    for (std::size_t j = 0; j < e.cols(); ++j) proj += du(i, j) * u(i, j);
    for (std::size_t j = 0; j < e.cols(); ++j)
      de(i, j) = (du(i, j) - proj * u(i, j)) / norms[i];
  }

  Matrix de0(k, e.cols()), de1(k, e.cols());
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < e.cols(); ++j) {
      de0(i, j) = de(i, j);
      de1(i, j) = de(k + i, j);
    }

  InfoNceResult res;
  res.loss = loss;
  res.grad0 = EncoderGrad::zeros_like(enc0);
  res.grad1 = EncoderGrad::zeros_like(enc1);
  encoder_backward(enc0, x0, de0, res.grad0);
  encoder_backward(enc1, x1, de1, res.grad1);
  return res;
}

namespace {

// Adam moments shaped like the encoder parameters.
struct AdamState {
  EncoderGrad m, v;
  explicit AdamState(const Encoder& enc)
      : m(EncoderGrad::zeros_like(enc)), v(EncoderGrad::zeros_like(enc)) {}
};

void adam_block(double* p, const double* g, double* m, double* v, std::size_t n,
                double lr, double bc1, double bc2) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
    v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kEps);
  }
}

void adam_step(Encoder& enc, const EncoderGrad& g, AdamState& st, double lr,
               std::size_t step1) {
  const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(step1));
  const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(step1));
  if (enc.kind == Encoder::Kind::kLinear) {
    adam_block(enc.weight.data().data(), g.weight.data().data(), st.m.weight.data().data(),
               st.v.weight.data().data(), enc.weight.size(), lr, bc1, bc2);
    return;
  }
  adam_block(enc.w1.data().data(), g.w1.data().data(), st.m.w1.data().data(),
             st.v.w1.data().data(), enc.w1.size(), lr, bc1, bc2);
  adam_block(enc.b1.data(), g.b1.data(), st.m.b1.data(), st.v.b1.data(), enc.b1.size(), lr,
             bc1, bc2);
  adam_block(enc.w2.data().data(), g.w2.data().data(), st.m.w2.data().data(),
             st.v.w2.data().data(), enc.w2.size(), lr, bc1, bc2);
  adam_block(enc.b2.data(), g.b2.data(), st.m.b2.data(), st.v.b2.data(), enc.b2.size(), lr,
             bc1, bc2);
}

}  // namespace

ContrastiveFit train_contrastive(const SimulatorDataset& d_syn, const ContrastiveConfig& cfg,
                                 Rng& rng) {
  cfg.validate();
  const std::size_t m = d_syn.x0.rows();
  if (m < 8) throw std::invalid_argument("train_contrastive: need at least 8 pairs");
  const std::size_t n_x = d_syn.x0.cols();
  const std::size_t n_z = cfg.n_z == 0 ? n_x : cfg.n_z;

  ContrastiveFit fit;
  if (cfg.encoder_kind == Encoder::Kind::kLinear) {
    const double std0 = std::sqrt(1.0 / static_cast<double>(n_x));
    for (int t = 0; t < 2; ++t) {
      Matrix w = rng.normal_matrix(n_x, n_z);
      for (auto& v : w.data()) v *= std0;
      fit.encoders[t] = Encoder::linear(std::move(w), cfg.normalize);
    }
  } else {
    for (int t = 0; t < 2; ++t)
      fit.encoders[t] = Encoder::mlp(n_x, n_z, cfg.hidden, rng, cfg.normalize);
  }

  const bool full_batch = cfg.batch == 0 || cfg.batch >= m;
  AdamState st0(fit.encoders[0]), st1(fit.encoders[1]);
  double best_loss = std::numeric_limits<double>::max();
  std::size_t stale = 0;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Matrix bx0, bx1;
    if (full_batch) {
      bx0 = d_syn.x0;
      bx1 = d_syn.x1;
    } else {
      std::vector<std::size_t> idx = rng.permutation(m);
      idx.resize(std::max<std::size_t>(2, cfg.batch));
      bx0 = slice_rows(d_syn.x0, idx);
      bx1 = slice_rows(d_syn.x1, idx);
    }

    InfoNceResult r = infonce_loss(fit.encoders[0], fit.encoders[1], bx0, bx1,
                                   cfg.temperature);
    if (!std::isfinite(r.loss))
      throw std::runtime_error("train_contrastive: non-finite loss at step " +
                               std::to_string(step));
    if (step == 0) fit.initial_loss = r.loss;
    fit.loss_trace.push_back(r.loss);

    // Plateau stop on the full-batch objective.
    if (full_batch) {
      if (r.loss < best_loss - cfg.plateau_tol * std::max(1.0, std::fabs(r.loss))) {
        best_loss = r.loss;
        stale = 0;
      } else if (++stale >= cfg.plateau_patience) {
        break;
      }
    }

    adam_step(fit.encoders[0], r.grad0, st0, cfg.step_size, step + 1);
    adam_step(fit.encoders[1], r.grad1, st1, cfg.step_size, step + 1);
  }

  const InfoNceResult last = infonce_loss(fit.encoders[0], fit.encoders[1], d_syn.x0,
                                          d_syn.x1, cfg.temperature);
  fit.final_loss = last.loss;
  fit.converged = fit.final_loss < fit.initial_loss;
  return fit;
}

EncoderPair pairwise_linear_map(const SimulatorDataset& d_syn) {
  const std::size_t m = d_syn.x0.rows();
  const std::size_t n_x = d_syn.x0.cols();
  if (m < n_x) throw std::invalid_argument("pairwise_linear_map: fewer pairs than dimensions");
  const Matrix a = la::lstsq(d_syn.x0, d_syn.x1, "pairwise_linear_map");
  EncoderPair pair;
  pair[0] = Encoder::identity(n_x);
  pair[1] = Encoder::linear(la::inverse(a));
  return pair;
}

EncoderPair oracle_extractors(const dgp::LinearDgpPair& spec) {
  EncoderPair pair;
  pair[0] = Encoder::linear(spec.s_inv[0]);
  pair[1] = Encoder::linear(spec.s_inv[1]);
  return pair;
}

AlignmentReport alignment_residual(const EncoderPair& enc, const Matrix& probe_x0,
                                   const Matrix& probe_x1, const Matrix& probe_z,
                                   MapKind map_kind) {
  if (probe_x0.rows() != probe_z.rows() || probe_x1.rows() != probe_z.rows())
    throw std::invalid_argument("alignment_residual: probe row mismatch");
  if (probe_z.rows() < probe_z.cols())
    throw std::invalid_argument("alignment_residual: fewer probe rows than latent dims");

  const Matrix zhat = la::vstack(enc[0].encode(probe_x0), enc[1].encode(probe_x1));
  const Matrix z = la::vstack(probe_z, probe_z);

  Matrix a;
  if (map_kind == MapKind::kOrthogonal) {
    const Matrix m = la::matmul_at_b(zhat, z);
    const la::Svd svd = la::svd_small(m);
    a = la::matmul(svd.u, la::transpose(svd.v));
  } else {
    a = la::lstsq(zhat, z, "alignment_residual");
  }

  const Matrix aligned = la::matmul(zhat, a);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) {
      const double d = aligned(i, j) - z(i, j);
      num += d * d;
      den += z(i, j) * z(i, j);
    }

  double cos_sum = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) {
      ab += aligned(i, j) * z(i, j);
      aa += aligned(i, j) * aligned(i, j);
      bb += z(i, j) * z(i, j);
    }
    cos_sum += ab / std::max(std::sqrt(aa * bb), kCosineEps);
  }

  AlignmentReport rep;
  rep.map_kind = map_kind;
  rep.residual = std::sqrt(num / den);
  rep.mean_cosine = cos_sum / static_cast<double>(z.rows());
  rep.estimated_h = a;
  return rep;
}

}  // namespace simcate::contrastive
