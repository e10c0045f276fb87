#pragma once

#include "simcate/la/matrix.hpp"
#include "simcate/rng.hpp"

namespace simcate {

/// One-hidden-layer rectifier network with scalar output.
struct Mlp {
  la::Matrix w1;  // n_in x hidden
  la::Vector b1;
  la::Vector w2;  // hidden
  double b2 = 0.0;

  /// Weights N(0, 1/fan_in), biases 0.
  static Mlp init(std::size_t n_in, std::size_t hidden, Rng& rng);

  std::size_t n_in() const { return w1.rows(); }
  std::size_t hidden() const { return b1.size(); }
};

/// Deterministic affine -> relu -> affine evaluation over the rows of z.
/// Throws on dimension mismatch or non-finite parameters.
la::Vector mlp_forward(const Mlp& net, const la::Matrix& z);

struct MlpGrad {
  la::Matrix w1;
  la::Vector b1;
  la::Vector w2;
  double b2 = 0.0;
  la::Matrix dinput;  // m x n_in, filled when requested

  static MlpGrad zeros_like(const Mlp& net, std::size_t batch_rows, bool want_input);
  void accumulate(const MlpGrad& other);
};

/// Exact backpropagated gradients of sum_i residual_weights[i] * output_i
/// with respect to all parameter blocks (and optionally the inputs).
MlpGrad mlp_gradients(const Mlp& net, const la::Matrix& z,
                      const la::Vector& residual_weights, bool want_input_grads = false);

void apply_gradient(Mlp& net, const MlpGrad& grad, double lr);

}  // namespace simcate
