#include "simcate/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "simcate/la/kernels.hpp"

namespace simcate {

Encoder Encoder::linear(Matrix w, bool normalize) {
  Encoder e;
  e.kind = Kind::kLinear;
  e.n_x = w.rows();
  e.n_z = w.cols();
  e.normalize = normalize;
  e.weight = std::move(w);
  return e;
}

Encoder Encoder::identity(std::size_t n, bool normalize) {
  return linear(Matrix::identity(n), normalize);
}

Encoder Encoder::mlp(std::size_t n_x, std::size_t n_z, std::size_t hidden, Rng& rng,
                     bool normalize) {
  Encoder e;
  e.kind = Kind::kMlp;
  e.n_x = n_x;
  e.n_z = n_z;
  e.normalize = normalize;
  e.w1 = rng.normal_matrix(n_x, hidden);
  for (auto& v : e.w1.data()) v *= std::sqrt(1.0 / static_cast<double>(n_x));
  e.b1.assign(hidden, 0.0);
  e.w2 = rng.normal_matrix(hidden, n_z);
  for (auto& v : e.w2.data()) v *= std::sqrt(1.0 / static_cast<double>(hidden));
  e.b2.assign(n_z, 0.0);
  return e;
}

Matrix Encoder::encode_raw(const Matrix& x) const {
  if (x.cols() != n_x) throw std::invalid_argument("Encoder: input dimension mismatch");
  if (kind == Kind::kLinear) return la::matmul(x, weight);
  Matrix h = la::matmul(x, w1);
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t j = 0; j < h.cols(); ++j) h(i, j) = std::tanh(h(i, j) + b1[j]);
  Matrix out = la::matmul(h, w2);
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += b2[j];
  return out;
}

Matrix Encoder::encode(const Matrix& x) const {
  Matrix out = encode_raw(x);
  if (normalize) out = la::normalize_rows(out, 1e-12);
  return out;
}

EncoderGrad EncoderGrad::zeros_like(const Encoder& enc) {
  EncoderGrad g;
  if (enc.kind == Encoder::Kind::kLinear) {
    g.weight = Matrix(enc.n_x, enc.n_z);
  } else {
    g.w1 = Matrix(enc.n_x, enc.hidden());
    g.b1.assign(enc.hidden(), 0.0);
    g.w2 = Matrix(enc.hidden(), enc.n_z);
    g.b2.assign(enc.n_z, 0.0);
  }
  return g;
}

void EncoderGrad::axpy(double alpha, const EncoderGrad& other) {
  auto add = [alpha](Matrix& a, const Matrix& b) {
    for (std::size_t k = 0; k < a.size(); ++k) a.data()[k] += alpha * b.data()[k];
  };
  auto addv = [alpha](Vector& a, const Vector& b) {
    for (std::size_t k = 0; k < a.size(); ++k) a[k] += alpha * b[k];
  };
  if (!weight.empty()) add(weight, other.weight);
  if (!w1.empty()) {
    add(w1, other.w1);
    addv(b1, other.b1);
    add(w2, other.w2);
    addv(b2, other.b2);
  }
}

double EncoderGrad::squared_norm() const {
  double s = 0.0;
  for (double v : weight.data()) s += v * v;
  for (double v : w1.data()) s += v * v;
  for (double v : b1) s += v * v;
  for (double v : w2.data()) s += v * v;
  for (double v : b2) s += v * v;
  return s;
}

void apply_gradient(Encoder& enc, const EncoderGrad& grad, double lr) {
  auto step = [lr](Matrix& p, const Matrix& g) {
    for (std::size_t k = 0; k < p.size(); ++k) p.data()[k] -= lr * g.data()[k];
  };
  auto stepv = [lr](Vector& p, const Vector& g) {
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
  };
  if (enc.kind == Encoder::Kind::kLinear) {
    step(enc.weight, grad.weight);
  } else {
    step(enc.w1, grad.w1);
    stepv(enc.b1, grad.b1);
    step(enc.w2, grad.w2);
    stepv(enc.b2, grad.b2);
  }
}

void encoder_backward(const Encoder& enc, const Matrix& x, const Matrix& d_out,
                      EncoderGrad& grad) {
  if (enc.kind == Encoder::Kind::kLinear) {
    grad.weight += la::matmul_at_b(x, d_out);
    return;
  }
  // Recompute hidden activations; batches are small enough that caching
  // them across calls is not worth the plumbing.
  Matrix h = la::matmul(x, enc.w1);
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t j = 0; j < h.cols(); ++j) h(i, j) = std::tanh(h(i, j) + enc.b1[j]);

  grad.w2 += la::matmul_at_b(h, d_out);
  for (std::size_t i = 0; i < d_out.rows(); ++i)
    for (std::size_t j = 0; j < d_out.cols(); ++j) grad.b2[j] += d_out(i, j);

  Matrix dh = la::matmul(d_out, la::transpose(enc.w2));
  for (std::size_t i = 0; i < dh.rows(); ++i)
    for (std::size_t j = 0; j < dh.cols(); ++j) dh(i, j) *= 1.0 - h(i, j) * h(i, j);

  grad.w1 += la::matmul_at_b(x, dh);
  for (std::size_t i = 0; i < dh.rows(); ++i)
    for (std::size_t j = 0; j < dh.cols(); ++j) grad.b1[j] += dh(i, j);
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  m.data() = j.at("data").get<std::vector<double>>();
  if (m.data().size() != m.rows() * m.cols())
    throw std::runtime_error("Encoder JSON: matrix payload size mismatch");
  return m;
}

}  // namespace

std::string Encoder::to_json_string() const {
  nlohmann::json j;
  j["kind"] = kind == Kind::kLinear ? "linear" : "mlp";
  j["n_x"] = n_x;
  j["n_z"] = n_z;
  j["normalize"] = normalize;
  if (kind == Kind::kLinear) {
    j["weight"] = matrix_to_json(weight);
  } else {
    j["w1"] = matrix_to_json(w1);
    j["b1"] = b1;
    j["w2"] = matrix_to_json(w2);
    j["b2"] = b2;
  }
  return j.dump();
}

std::string encoder_pair_to_json(const EncoderPair& pair) {
  nlohmann::json j;
  j["f_0"] = nlohmann::json::parse(pair[0].to_json_string());
  j["f_1"] = nlohmann::json::parse(pair[1].to_json_string());
  return j.dump();
}

EncoderPair encoder_pair_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  EncoderPair pair;
  pair[0] = Encoder::from_json_string(j.at("f_0").dump());
  pair[1] = Encoder::from_json_string(j.at("f_1").dump());
  return pair;
}

Encoder Encoder::from_json_string(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  Encoder e;
  const std::string kind = j.at("kind").get<std::string>();
  e.kind = kind == "linear" ? Kind::kLinear : Kind::kMlp;
  e.n_x = j.at("n_x").get<std::size_t>();
  e.n_z = j.at("n_z").get<std::size_t>();
  e.normalize = j.at("normalize").get<bool>();
  if (e.kind == Kind::kLinear) {
    e.weight = matrix_from_json(j.at("weight"));
  } else {
    e.w1 = matrix_from_json(j.at("w1"));
    e.b1 = j.at("b1").get<Vector>();
    e.w2 = matrix_from_json(j.at("w2"));
    e.b2 = j.at("b2").get<Vector>();
  }
  return e;
}

}  // namespace simcate
