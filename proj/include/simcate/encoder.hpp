#pragma once

#include <array>
#include <string>

#include "simcate/la/matrix.hpp"
#include "simcate/rng.hpp"

namespace simcate {

using la::Matrix;
using la::Vector;

/// Representation extractor mapping covariates (m x n_x) to latents (m x n_z).
/// Linear encoders apply a single weight matrix; mlp encoders one tanh hidden
/// layer. With `normalize` set, outputs are projected to the unit sphere.
struct Encoder {
  enum class Kind { kLinear, kMlp };

  Kind kind = Kind::kLinear;
  std::size_t n_x = 0;
  std::size_t n_z = 0;
  bool normalize = false;

  Matrix weight;  // linear: n_x x n_z

  Matrix w1;  // mlp: n_x x hidden
  Vector b1;
  Matrix w2;  // hidden x n_z
  Vector b2;

  static Encoder linear(Matrix w, bool normalize = false);
  static Encoder identity(std::size_t n, bool normalize = false);
  static Encoder mlp(std::size_t n_x, std::size_t n_z, std::size_t hidden, Rng& rng,
                     bool normalize = false);

  std::size_t hidden() const { return b1.size(); }

  /// Raw forward pass (no sphere projection).
  Matrix encode_raw(const Matrix& x) const;
  /// Forward pass honoring the normalize flag.
  Matrix encode(const Matrix& x) const;

  std::string to_json_string() const;
  static Encoder from_json_string(const std::string& text);
};

using EncoderPair = std::array<Encoder, 2>;

/// One JSON document holding both treatments' extractors.
std::string encoder_pair_to_json(const EncoderPair& pair);
EncoderPair encoder_pair_from_json(const std::string& text);

/// Gradient accumulator mirroring an encoder's parameter blocks.
struct EncoderGrad {
  Matrix weight;
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;

  static EncoderGrad zeros_like(const Encoder& enc);
  void axpy(double alpha, const EncoderGrad& other);
  double squared_norm() const;
};

/// Applies grad descent step: enc -= lr * grad.
void apply_gradient(Encoder& enc, const EncoderGrad& grad, double lr);

/// Backpropagates d_out (m x n_z, gradient w.r.t. raw outputs) through the
/// encoder evaluated at x; accumulates into `grad`.
void encoder_backward(const Encoder& enc, const Matrix& x, const Matrix& d_out,
                      EncoderGrad& grad);

}  // namespace simcate
