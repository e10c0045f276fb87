#pragma once

#include <array>
#include <string>

#include "simcate/encoder.hpp"
#include "simcate/mlp.hpp"

namespace simcate {

/// A fitted CATE estimator: per-treatment representation extractors plus
/// per-treatment outcome heads. Prediction for (x, t) is
/// mu_hat_1(f_hat_t(x)) - mu_hat_0(f_hat_t(x)).
struct CateModel {
  enum class Kind { kSimOnly, kRealOnly, kMuOnly, kSimponet };
  enum class HeadKind { kLinear, kMlp };

  Kind kind = Kind::kRealOnly;
  HeadKind head_kind = HeadKind::kLinear;
  EncoderPair f_hat;
  std::array<la::Vector, 2> mu_linear;  // linear heads
  std::array<Mlp, 2> mu_mlp;            // network heads
  std::string metadata;                 // fit configuration echo (JSON)

  /// mu_hat_head evaluated on latent rows.
  la::Vector head_values(const la::Matrix& z_hat, int head) const;

  la::Vector predict_cate(const la::Matrix& x, const std::vector<int>& t) const;

  /// Factual predictions mu_hat_{t_i}(f_hat_{t_i}(x_i)).
  la::Vector predict_factual(const la::Matrix& x, const std::vector<int>& t) const;

  std::string to_json_string() const;
};

const char* to_string(CateModel::Kind kind);
CateModel::Kind cate_kind_from_string(const std::string& s);

}  // namespace simcate
