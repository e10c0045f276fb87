#pragma once

#include <utility>

#include "simcate/dgp.hpp"
#include "simcate/encoder.hpp"

namespace simcate::contrastive {

using dgp::SimulatorDataset;
using la::Matrix;
using la::Vector;

struct ContrastiveConfig {
  double temperature = 0.1;
  std::size_t steps = 2000;  // upper bound; plateau stopping may end earlier
  double step_size = 1e-2;
  std::size_t batch = 0;  // 0 = full batch
  Encoder::Kind encoder_kind = Encoder::Kind::kLinear;
  bool normalize = true;
  std::size_t hidden = 50;  // mlp encoders only
  std::size_t n_z = 0;      // 0 = same as n_x
  double plateau_tol = 1e-7;
  std::size_t plateau_patience = 300;  // covers the optimizer warm-up overshoot

  void validate() const;
};

struct InfoNceResult {
  double loss = 0.0;
  EncoderGrad grad0;
  EncoderGrad grad1;
};

/// InfoNCE over paired counterfactual covariates. Every embedding serves as
/// an anchor; its positive is the other-treatment embedding of the same row,
/// negatives are all embeddings of other rows under both treatments. The
/// softmax denominator holds the positive plus the negatives. Similarity is
/// cosine; gradients are exact derivatives w.r.t. both encoders' parameters.
InfoNceResult infonce_loss(const Encoder& enc0, const Encoder& enc1, const Matrix& x0,
                           const Matrix& x1, double temperature);

struct ContrastiveFit {
  EncoderPair encoders;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> loss_trace;
  bool converged = false;
};

/// Full-batch gradient descent on infonce_loss with step halving whenever a
/// step would increase the loss (minibatch mode uses the fixed step).
ContrastiveFit train_contrastive(const SimulatorDataset& d_syn, const ContrastiveConfig& cfg,
                                 Rng& rng);

/// Closed-form extractor recovery for linear simulators: solves
/// A = argmin ||x0 A - x1||_F^2 and returns f0 = identity, f1: x -> x A^{-1},
/// a latent recovery up to the fixed linear diffeomorphism h = S_0.
EncoderPair pairwise_linear_map(const SimulatorDataset& d_syn);

/// Ground-truth extractors S_t^{-1} wrapped as linear encoders.
EncoderPair oracle_extractors(const dgp::LinearDgpPair& spec);

enum class MapKind { kOrthogonal, kAffine };

struct AlignmentReport {
  MapKind map_kind = MapKind::kOrthogonal;
  double residual = 0.0;     // ||Zhat A - Z||_F / ||Z||_F
  double mean_cosine = 0.0;  // mean cosine between aligned rows and truth
  Matrix estimated_h;        // the solved map A
};

/// Stacks encoder outputs over both treatments against the true latents and
/// solves the best orthogonal (Procrustes) or unconstrained linear map.
AlignmentReport alignment_residual(const EncoderPair& enc, const Matrix& probe_x0,
                                   const Matrix& probe_x1, const Matrix& probe_z,
                                   MapKind map_kind);

}  // namespace simcate::contrastive
