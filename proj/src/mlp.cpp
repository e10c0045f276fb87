#include "simcate/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace simcate {

using la::Matrix;
using la::Vector;

Mlp Mlp::init(std::size_t n_in, std::size_t hidden, Rng& rng) {
  Mlp net;
  net.w1 = rng.normal_matrix(n_in, hidden);
  const double s1 = std::sqrt(1.0 / static_cast<double>(n_in));
  for (auto& v : net.w1.data()) v *= s1;
  net.b1.assign(hidden, 0.0);
  net.w2 = rng.normal_vector(hidden);
  const double s2 = std::sqrt(1.0 / static_cast<double>(hidden));
  for (auto& v : net.w2) v *= s2;
  net.b2 = 0.0;
  return net;
}

namespace {

void check_finite(const Mlp& net) {
  auto bad = [](double v) { return !std::isfinite(v); };
  for (double v : net.w1.data())
    if (bad(v)) throw std::runtime_error("mlp: non-finite parameter");
  for (double v : net.b1)
    if (bad(v)) throw std::runtime_error("mlp: non-finite parameter");
  for (double v : net.w2)
    if (bad(v)) throw std::runtime_error("mlp: non-finite parameter");
  if (bad(net.b2)) throw std::runtime_error("mlp: non-finite parameter");
}

}  // namespace

Vector mlp_forward(const Mlp& net, const Matrix& z) {
  if (z.cols() != net.n_in()) throw std::invalid_argument("mlp_forward: dimension mismatch");
  check_finite(net);
  const std::size_t m = z.rows(), h = net.hidden();
  Vector out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* zi = z.row_ptr(i);
    double acc = net.b2;
    for (std::size_t j = 0; j < h; ++j) {
      double pre = net.b1[j];
      for (std::size_t c = 0; c < z.cols(); ++c) pre += zi[c] * net.w1(c, j);
      if (pre > 0.0) acc += pre * net.w2[j];
    }
    out[i] = acc;
  }
  return out;
}

MlpGrad MlpGrad::zeros_like(const Mlp& net, std::size_t batch_rows, bool want_input) {
  MlpGrad g;
  g.w1 = Matrix(net.w1.rows(), net.w1.cols());
  g.b1.assign(net.b1.size(), 0.0);
  g.w2.assign(net.w2.size(), 0.0);
  g.b2 = 0.0;
  if (want_input) g.dinput = Matrix(batch_rows, net.n_in());
  return g;
}

void MlpGrad::accumulate(const MlpGrad& other) {
  for (std::size_t k = 0; k < w1.size(); ++k) w1.data()[k] += other.w1.data()[k];
  for (std::size_t k = 0; k < b1.size(); ++k) b1[k] += other.b1[k];
  for (std::size_t k = 0; k < w2.size(); ++k) w2[k] += other.w2[k];
  b2 += other.b2;
}

MlpGrad mlp_gradients(const Mlp& net, const Matrix& z, const Vector& residual_weights,
                      bool want_input_grads) {
  if (z.cols() != net.n_in()) throw std::invalid_argument("mlp_gradients: dimension mismatch");
  if (residual_weights.size() != z.rows())
    throw std::invalid_argument("mlp_gradients: weight vector length mismatch");
  const std::size_t m = z.rows(), h = net.hidden(), d = net.n_in();

  MlpGrad g = MlpGrad::zeros_like(net, m, want_input_grads);
  Vector pre(h);
  for (std::size_t i = 0; i < m; ++i) {
    const double rw = residual_weights[i];
    const double* zi = z.row_ptr(i);
    for (std::size_t j = 0; j < h; ++j) {
      double p = net.b1[j];
      for (std::size_t c = 0; c < d; ++c) p += zi[c] * net.w1(c, j);
      pre[j] = p;
    }
    g.b2 += rw;
    for (std::size_t j = 0; j < h; ++j) {
      const double act = pre[j] > 0.0 ? pre[j] : 0.0;
      g.w2[j] += rw * act;
      if (pre[j] > 0.0) {
        const double dh = rw * net.w2[j];
        g.b1[j] += dh;
        for (std::size_t c = 0; c < d; ++c) g.w1(c, j) += dh * zi[c];
        if (want_input_grads)
          for (std::size_t c = 0; c < d; ++c) g.dinput(i, c) += dh * net.w1(c, j);
      }
    }
  }
  return g;
}

void apply_gradient(Mlp& net, const MlpGrad& grad, double lr) {
  for (std::size_t k = 0; k < net.w1.size(); ++k) net.w1.data()[k] -= lr * grad.w1.data()[k];
  for (std::size_t k = 0; k < net.b1.size(); ++k) net.b1[k] -= lr * grad.b1[k];
  for (std::size_t k = 0; k < net.w2.size(); ++k) net.w2[k] -= lr * grad.w2[k];
  net.b2 -= lr * grad.b2;
}

}  // namespace simcate
