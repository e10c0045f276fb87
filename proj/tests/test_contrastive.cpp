#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "simcate/contrastive.hpp"
#include "simcate/la/decomp.hpp"
#include "simcate/la/kernels.hpp"

using namespace simcate;
using namespace simcate::contrastive;
using la::Matrix;
using la::Vector;

namespace {

// Central finite differences on a double slot inside an encoder.
double fd_slot(Encoder& e0, Encoder& e1, const Matrix& x0, const Matrix& x1, double t,
               double* slot) {
  constexpr double h = 1e-5;
  const double saved = *slot;
  *slot = saved + h;
  const double up = infonce_loss(e0, e1, x0, x1, t).loss;
  *slot = saved - h;
  const double dn = infonce_loss(e0, e1, x0, x1, t).loss;
  *slot = saved;
  return (up - dn) / (2.0 * h);
}

void check_encoder_grads(Encoder& e0, Encoder& e1, const Matrix& x0, const Matrix& x1,
                         double t) {
  const InfoNceResult res = infonce_loss(e0, e1, x0, x1, t);
  auto check_block = [&](Matrix& param, const Matrix& grad) {
    for (std::size_t k = 0; k < param.size(); ++k) {
      const double fd = fd_slot(e0, e1, x0, x1, t, &param.data()[k]);
      const double an = grad.data()[k];
      CHECK(std::fabs(an - fd) <= 1e-4 * std::max({std::fabs(an), std::fabs(fd), 1e-6}));
    }
  };
  auto check_vec = [&](Vector& param, const Vector& grad) {
    for (std::size_t k = 0; k < param.size(); ++k) {
      const double fd = fd_slot(e0, e1, x0, x1, t, &param[k]);
      const double an = grad[k];
      CHECK(std::fabs(an - fd) <= 1e-4 * std::max({std::fabs(an), std::fabs(fd), 1e-6}));
    }
  };
  if (e0.kind == Encoder::Kind::kLinear) {
    check_block(e0.weight, res.grad0.weight);
    check_block(e1.weight, res.grad1.weight);
  } else {
    check_block(e0.w1, res.grad0.w1);
    check_vec(e0.b1, res.grad0.b1);
    check_block(e0.w2, res.grad0.w2);
    check_vec(e0.b2, res.grad0.b2);
    check_block(e1.w1, res.grad1.w1);
    check_vec(e1.b2, res.grad1.b2);
  }
}

SimulatorDataset linear_pairs(const Matrix& z, const Matrix& s0, const Matrix& s1) {
  SimulatorDataset d;
  d.x0 = la::matmul(z, s0);
  d.x1 = la::matmul(z, s1);
  d.y0.assign(z.rows(), 0.0);
  d.y1.assign(z.rows(), 0.0);
  return d;
}

}  // namespace

TEST_CASE("infonce loss on orthogonal two-pair batch matches the hand softmax") {
  // Embeddings: row 0 -> [1,0] under both treatments, row 1 -> [0,1].
  // Every anchor has positive similarity 1 and two negatives at 0, so each
  // per-anchor term is -log(e / (e + 2)).
  Encoder id0 = Encoder::identity(2), id1 = Encoder::identity(2);
  Matrix x{{1, 0}, {0, 1}};
  const InfoNceResult res = infonce_loss(id0, id1, x, x, 1.0);
  const double expect = -std::log(std::exp(1.0) / (std::exp(1.0) + 2.0));
  CHECK(res.loss == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("infonce loss with identical embeddings is log(#negatives + 1)") {
  Encoder id0 = Encoder::identity(2), id1 = Encoder::identity(2);
  Matrix x(3, 2);
  for (int i = 0; i < 3; ++i) {
    x(i, 0) = 2.0;  // same embedding for every row
    x(i, 1) = 0.0;
  }
  for (double temp : {1.0, 0.5, 0.1}) {
    const InfoNceResult res = infonce_loss(id0, id1, x, x, temp);
    CHECK(res.loss == doctest::Approx(std::log(5.0)).epsilon(1e-12));  // 2(k-1)=4 negatives
  }
}

TEST_CASE("infonce rejects degenerate batches and embeddings") {
  Encoder id0 = Encoder::identity(2), id1 = Encoder::identity(2);
  Matrix one(1, 2, 1.0);
  CHECK_THROWS_AS(infonce_loss(id0, id1, one, one, 1.0), std::invalid_argument);

  Encoder zero = Encoder::linear(Matrix(2, 2));  // all embeddings zero
  Matrix x{{1, 0}, {0, 1}};
  CHECK_THROWS_AS(infonce_loss(zero, zero, x, x, 1.0), std::runtime_error);
}

TEST_CASE("infonce loss is invariant to batch row permutation") {
  Rng rng(5);
  Matrix x0 = rng.normal_matrix(6, 3), x1 = rng.normal_matrix(6, 3);
  Encoder e0 = Encoder::linear(rng.normal_matrix(3, 3));
  Encoder e1 = Encoder::linear(rng.normal_matrix(3, 3));
  const double base = infonce_loss(e0, e1, x0, x1, 0.3).loss;

  const std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
  Matrix px0(6, 3), px1(6, 3);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      px0(i, j) = x0(perm[i], j);
      px1(i, j) = x1(perm[i], j);
    }
  const double permuted = infonce_loss(e0, e1, px0, px1, 0.3).loss;
  CHECK(permuted == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("infonce gradients match central finite differences") {
  Rng rng(9);
  const Matrix x0 = rng.normal_matrix(4, 3), x1 = rng.normal_matrix(4, 3);

  SUBCASE("linear encoders") {
    Encoder e0 = Encoder::linear(rng.normal_matrix(3, 2));
    Encoder e1 = Encoder::linear(rng.normal_matrix(3, 2));
    check_encoder_grads(e0, e1, x0, x1, 0.5);
  }
  SUBCASE("mlp encoders") {
    Rng r2(10);
    Encoder e0 = Encoder::mlp(3, 2, 4, r2);
    Encoder e1 = Encoder::mlp(3, 2, 4, r2);
    check_encoder_grads(e0, e1, x0, x1, 0.5);
  }
}

TEST_CASE("train_contrastive decreases the loss and is reproducible") {
  Rng rng(15);
  const Matrix z = dgp::sample_latents(32, 3, rng);
  const Matrix s = rng.normal_matrix(3, 3);
  const SimulatorDataset d = linear_pairs(z, s, s);  // shared map, shared latents

  ContrastiveConfig cfg;
  cfg.steps = 60;
  Rng ra(16), rb(16);
  const ContrastiveFit fa = train_contrastive(d, cfg, ra);
  const ContrastiveFit fb = train_contrastive(d, cfg, rb);
  CHECK(fa.final_loss <= fa.initial_loss);
  CHECK(fa.converged);
  CHECK(la::max_abs_diff(fa.encoders[0].weight, fb.encoders[0].weight) == 0.0);
  CHECK(la::max_abs_diff(fa.encoders[1].weight, fb.encoders[1].weight) == 0.0);
}

TEST_CASE("train_contrastive rejects tiny datasets") {
  Rng rng(17);
  const Matrix z = dgp::sample_latents(4, 2, rng);
  const SimulatorDataset d = linear_pairs(z, Matrix::identity(2), Matrix::identity(2));
  ContrastiveConfig cfg;
  Rng r(18);
  CHECK_THROWS_AS(train_contrastive(d, cfg, r), std::invalid_argument);
}

TEST_CASE("contrastive recovery on sphere latents reaches a tight alignment") {
  Rng rng(19);
  dgp::GapConfig gaps(0.3, 0.3, 0.5);
  const auto pair = dgp::build_linear_pair(gaps, 3, 0, 0, rng);
  const Matrix z = dgp::sample_latents(128, 3, rng, dgp::LatentMode::kSphere);
  const SimulatorDataset d = linear_pairs(z, pair.s(0), pair.s(1));

  ContrastiveConfig cfg;
  cfg.steps = 400;
  Rng rt(20);
  const ContrastiveFit fit = train_contrastive(d, cfg, rt);
  const AlignmentReport rep =
      alignment_residual(fit.encoders, d.x0, d.x1, z, MapKind::kOrthogonal);
  CHECK(rep.residual < 0.15);
  CHECK(rep.mean_cosine > 0.95);
}

TEST_CASE("pairwise_linear_map closed-form recovery") {
  SUBCASE("identical maps give identity") {
    Rng rng(21);
    const Matrix z = dgp::sample_latents(20, 3, rng);
    const Matrix s = rng.normal_matrix(3, 3);
    const auto enc = pairwise_linear_map(linear_pairs(z, s, s));
    CHECK(la::max_abs_diff(enc[1].weight, Matrix::identity(3)) < 1e-9);
  }
  SUBCASE("scalar cross map") {
    Matrix z(5, 1);
    for (int i = 0; i < 5; ++i) z(i, 0) = i + 1.0;
    const auto enc = pairwise_linear_map(linear_pairs(z, Matrix{{2.0}}, Matrix{{3.0}}));
    // x0 = 2z, x1 = 3z, A = 1.5, f1(x) = x / 1.5.
    CHECK(enc[1].weight(0, 0) == doctest::Approx(1.0 / 1.5).epsilon(1e-12));
    CHECK(enc[0].weight(0, 0) == doctest::Approx(1.0));
  }
  SUBCASE("positive pairs collapse to identical latents") {
    Rng rng(22);
    const auto pair = dgp::build_linear_pair(dgp::GapConfig(0.2, 0.4, 0.1), 4, 0, 0, rng);
    const Matrix z = dgp::sample_latents(40, 4, rng);
    const SimulatorDataset d = linear_pairs(z, pair.s(0), pair.s(1));
    const auto enc = pairwise_linear_map(d);
    CHECK(la::max_abs_diff(enc[0].encode(d.x0), enc[1].encode(d.x1)) <= 1e-9);
  }
  SUBCASE("fewer pairs than dimensions is rejected") {
    Rng rng(23);
    const Matrix z = dgp::sample_latents(2, 3, rng);
    const SimulatorDataset d = linear_pairs(z, Matrix::identity(3), Matrix::identity(3));
    CHECK_THROWS_AS(pairwise_linear_map(d), std::invalid_argument);
  }
}

TEST_CASE("oracle extractors invert the simulator covariates exactly") {
  Rng rng(24);
  const auto pair = dgp::build_linear_pair(dgp::GapConfig(0.2, 0.3, 0.4), 3, 0, 0, rng);
  const Matrix z = dgp::sample_latents(30, 3, rng);
  const SimulatorDataset d = linear_pairs(z, pair.s(0), pair.s(1));
  const auto enc = oracle_extractors(pair);
  CHECK(la::max_abs_diff(enc[0].encode(d.x0), z) < 1e-8);
  CHECK(la::max_abs_diff(enc[1].encode(d.x1), z) < 1e-8);
}

TEST_CASE("alignment_residual oracle, rotation, and null cases") {
  Rng rng(25);
  const auto pair = dgp::build_linear_pair(dgp::GapConfig(0.1, 0.3, 0.2), 3, 0, 0, rng);
  const Matrix z = dgp::sample_latents(200, 3, rng);
  const SimulatorDataset d = linear_pairs(z, pair.s(0), pair.s(1));

  SUBCASE("true extractors align exactly") {
    const auto enc = oracle_extractors(pair);
    const AlignmentReport rep = alignment_residual(enc, d.x0, d.x1, z, MapKind::kOrthogonal);
    CHECK(rep.residual <= 1e-9);
    CHECK(rep.mean_cosine >= 1.0 - 1e-9);
  }
  SUBCASE("a known rotation is recovered as its transpose") {
    // Random orthogonal Q from the SVD of a Gaussian matrix.
    const la::Svd svd = la::svd_small(rng.normal_matrix(3, 3));
    const Matrix q = la::matmul(svd.u, la::transpose(svd.v));
    EncoderPair enc;
    enc[0] = Encoder::linear(la::matmul(pair.s_inv[0], q));
    enc[1] = Encoder::linear(la::matmul(pair.s_inv[1], q));
    const AlignmentReport rep = alignment_residual(enc, d.x0, d.x1, z, MapKind::kOrthogonal);
    CHECK(rep.residual <= 1e-9);
    CHECK(la::max_abs_diff(rep.estimated_h, la::transpose(q)) < 1e-8);
  }
  SUBCASE("independent noise has residual near one under the affine map") {
    Rng noise(26);
    EncoderPair enc;
    enc[0] = Encoder::linear(noise.normal_matrix(3, 3));
    enc[1] = Encoder::linear(noise.normal_matrix(3, 3));
    // Encoders applied to fresh noise covariates unrelated to z.
    SimulatorDataset junk;
    junk.x0 = noise.normal_matrix(200, 3);
    junk.x1 = noise.normal_matrix(200, 3);
    const AlignmentReport rep =
        alignment_residual(enc, junk.x0, junk.x1, z, MapKind::kAffine);
    CHECK(std::fabs(rep.residual - 1.0) < 0.1);
  }
  SUBCASE("too few probe rows is rejected") {
    Matrix z2(2, 3);
    Matrix x2(2, 3);
    const auto enc = oracle_extractors(pair);
    CHECK_THROWS_AS(alignment_residual(enc, x2, x2, z2, MapKind::kOrthogonal),
                    std::invalid_argument);
  }
}

TEST_CASE("encoder json round trip") {
  Rng rng(27);
  Encoder lin = Encoder::linear(rng.normal_matrix(3, 2), true);
  const Encoder lin2 = Encoder::from_json_string(lin.to_json_string());
  CHECK(lin2.kind == Encoder::Kind::kLinear);
  CHECK(lin2.normalize);
  CHECK(la::max_abs_diff(lin.weight, lin2.weight) == 0.0);

  Encoder mlp = Encoder::mlp(4, 2, 8, rng);
  const Encoder mlp2 = Encoder::from_json_string(mlp.to_json_string());
  CHECK(mlp2.kind == Encoder::Kind::kMlp);
  const Matrix probe = rng.normal_matrix(5, 4);
  CHECK(la::max_abs_diff(mlp.encode(probe), mlp2.encode(probe)) == 0.0);

  EncoderPair pair = {lin, Encoder::linear(rng.normal_matrix(3, 2))};
  const EncoderPair pair2 = encoder_pair_from_json(encoder_pair_to_json(pair));
  CHECK(la::max_abs_diff(pair[0].weight, pair2[0].weight) == 0.0);
  CHECK(la::max_abs_diff(pair[1].weight, pair2[1].weight) == 0.0);
}
