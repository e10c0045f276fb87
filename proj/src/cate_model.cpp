#include "simcate/cate_model.hpp"

#include <stdexcept>

#include <json.hpp>

#include "simcate/la/kernels.hpp"

namespace simcate {

using la::Matrix;
using la::Vector;

Vector CateModel::head_values(const Matrix& z_hat, int head) const {
  if (head_kind == HeadKind::kLinear) {
    if (z_hat.cols() != mu_linear[head].size())
      throw std::invalid_argument("CateModel: latent/head dimension mismatch");
    return la::matvec(z_hat, mu_linear[head]);
  }
  return mlp_forward(mu_mlp[head], z_hat);
}

namespace {

// Group rows by treatment, evaluate per group, scatter back.
template <typename Fn>
Vector per_treatment(const Matrix& x, const std::vector<int>& t, Fn&& eval) {
  if (x.rows() != t.size()) throw std::invalid_argument("CateModel: x/t row mismatch");
  Vector out(x.rows(), 0.0);
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t[i] == arm) idx.push_back(i);
    if (idx.empty()) continue;
    Matrix xs(idx.size(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) xs(i, j) = x(idx[i], j);
    const Vector vals = eval(xs, arm);
    for (std::size_t i = 0; i < idx.size(); ++i) out[idx[i]] = vals[i];
  }
  return out;
}

}  // namespace

Vector CateModel::predict_cate(const Matrix& x, const std::vector<int>& t) const {
  return per_treatment(x, t, [this](const Matrix& xs, int arm) {
    const Matrix z_hat = f_hat[arm].encode(xs);
    Vector v1 = head_values(z_hat, 1);
    const Vector v0 = head_values(z_hat, 0);
    for (std::size_t i = 0; i < v1.size(); ++i) v1[i] -= v0[i];
    return v1;
  });
}

Vector CateModel::predict_factual(const Matrix& x, const std::vector<int>& t) const {
  return per_treatment(x, t, [this](const Matrix& xs, int arm) {
    return head_values(f_hat[arm].encode(xs), arm);
  });
}

const char* to_string(CateModel::Kind kind) {
  switch (kind) {
    case CateModel::Kind::kSimOnly: return "sim_only";
    case CateModel::Kind::kRealOnly: return "real_only";
    case CateModel::Kind::kMuOnly: return "mu_only";
    case CateModel::Kind::kSimponet: return "simponet";
  }
  return "unknown";
}

CateModel::Kind cate_kind_from_string(const std::string& s) {
  if (s == "sim_only") return CateModel::Kind::kSimOnly;
  if (s == "real_only") return CateModel::Kind::kRealOnly;
  if (s == "mu_only") return CateModel::Kind::kMuOnly;
  if (s == "simponet") return CateModel::Kind::kSimponet;
  throw std::invalid_argument("unknown estimator kind: " + s);
}

std::string CateModel::to_json_string() const {
  nlohmann::json j;
  j["kind"] = to_string(kind);
  j["head_kind"] = head_kind == HeadKind::kLinear ? "linear" : "mlp";
  for (int t = 0; t < 2; ++t) {
    const std::string key = "f_hat_" + std::to_string(t);
    j[key] = nlohmann::json::parse(f_hat[t].to_json_string());
    if (head_kind == HeadKind::kLinear) {
      j["mu_hat_" + std::to_string(t)] = mu_linear[t];
    } else {
      nlohmann::json net;
      net["w1"] = mu_mlp[t].w1.data();
      net["w1_rows"] = mu_mlp[t].w1.rows();
      net["b1"] = mu_mlp[t].b1;
      net["w2"] = mu_mlp[t].w2;
      net["b2"] = mu_mlp[t].b2;
      j["mu_hat_" + std::to_string(t)] = net;
    }
  }
  j["metadata"] = metadata.empty() ? nlohmann::json::object()
                                   : nlohmann::json::parse(metadata);
  return j.dump(2);
}

}  // namespace simcate
