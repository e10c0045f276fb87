#pragma once

#include <cstdint>

#include "simcate/la/matrix.hpp"

namespace simcate {

/// Deterministic xoshiro256++ generator with explicit normal sampling.
/// Streams depend only on the seed, never on platform library internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Standard normal via Box-Muller (one value cached per pair).
  double normal();
  bool bernoulli(double p);

  la::Vector normal_vector(std::size_t n);
  la::Matrix normal_matrix(std::size_t rows, std::size_t cols);

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

  /// Order-sensitive 64-bit combiner used to derive substream seeds.
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b);
  static std::uint64_t hash_double(double x);

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace simcate
