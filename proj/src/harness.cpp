#include "simcate/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "simcate/la/kernels.hpp"

namespace simcate::harness {

namespace {

using json = nlohmann::json;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Vector propensity_direction(std::size_t n_z) {
  return Vector(n_z, 1.0 / std::sqrt(static_cast<double>(n_z)));
}

const char* to_string(DgpKind k) {
  switch (k) {
    case DgpKind::kLinear: return "linear";
    case DgpKind::kGp: return "gp";
    case DgpKind::kFlow: return "flow";
  }
  return "unknown";
}

DgpKind dgp_kind_from_string(const std::string& s, const std::string& path) {
  if (s == "linear") return DgpKind::kLinear;
  if (s == "gp") return DgpKind::kGp;
  if (s == "flow") return DgpKind::kFlow;
  throw std::runtime_error("config error at " + path + ": unknown dgp_kind '" + s + "'");
}

}  // namespace

void SweepConfig::validate() const {
  if (n_train == 0 || n_sim == 0 || n_test == 0 || n_z == 0)
    throw std::runtime_error("config error: sample counts and n_z must be positive");
  if (threads == 0) throw std::runtime_error("config error: threads must be positive");
  if (gap_low < 0.0 || gap_low > 0.5 || gap_high < 0.0 || gap_high > 0.5)
    throw std::runtime_error("config error: gap_low/gap_high outside [0, 0.5]");
  if (seeds.empty()) throw std::runtime_error("config error: seeds must be nonempty");
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = i + 1; j < seeds.size(); ++j)
      if (seeds[i] == seeds[j]) throw std::runtime_error("config error: duplicate seed");
  if (estimators.empty()) throw std::runtime_error("config error: estimators must be nonempty");
  if (sigma_y < 0.0 || sigma_ys < 0.0)
    throw std::runtime_error("config error: negative noise level");
  if (lambda_tau < 0.0) throw std::runtime_error("config error: negative lambda_tau");
  if (gp_gamma_base <= 0.0 || gp_gamma_tau <= 0.0)
    throw std::runtime_error("config error: gp kernel widths must be positive");
  if (dgp_kind == DgpKind::kFlow && extractor_mode == ExtractorMode::kOracle)
    throw std::runtime_error(
        "config error: oracle extractors are unavailable for flow covariates; use "
        "extractor_mode=learned");
  if (!gap_grid.empty()) return;
  if (gap_high < gap_low)
    throw std::runtime_error("config error: gap_high below gap_low");
}

std::vector<dgp::GapConfig> SweepConfig::grid() const {
  if (!gap_grid.empty()) return gap_grid;
  std::vector<dgp::GapConfig> cells;
  cells.emplace_back(0.0, gap_high, gap_high, gamma_w);
  const double levels[2] = {gap_low, gap_high};
  for (double r : levels)
    for (double rs : levels)
      for (double tau : levels) cells.emplace_back(r, rs, tau, gamma_w);
  return cells;
}

namespace {

const std::map<std::string, int>& allowed_keys() {
  static const std::map<std::string, int> keys = {
      {"dgp_kind", 0},       {"n_train", 0},          {"n_sim", 0},
      {"n_test", 0},         {"n_z", 0},              {"gap_low", 0},
      {"gap_high", 0},       {"gap_grid", 0},         {"seeds", 0},
      {"estimators", 0},     {"extractor_mode", 0},   {"sigma_y", 0},
      {"sigma_ys", 0},       {"gamma_w", 0},          {"lambda_tau", 0},
      {"propensity_scale", 0}, {"gp_gamma_base", 0},  {"gp_gamma_tau", 0},
      {"latents_csv", 0},    {"output_dir", 0},       {"threads", 0},
  };
  return keys;
}

double get_gap_field(const json& cell, const std::string& key, double fallback,
                     const std::string& path) {
  if (!cell.contains(key)) return fallback;
  if (!cell.at(key).is_number())
    throw std::runtime_error("config error at " + path + "." + key + ": expected a number");
  return cell.at(key).get<double>();
}

}  // namespace

SweepConfig parse_config(const std::string& json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config error at " + origin + ": malformed JSON (" + e.what() +
                             ")");
  }
  if (!j.is_object()) throw std::runtime_error("config error at " + origin + ": not an object");

  for (const auto& item : j.items())
    if (!allowed_keys().count(item.key()))
      throw std::runtime_error("config error at " + origin + ": unknown key '" + item.key() +
                               "'");
  if (!j.contains("dgp_kind"))
    throw std::runtime_error("config error at " + origin + ": missing required key 'dgp_kind'");

  SweepConfig cfg;
  auto num = [&](const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number())
      throw std::runtime_error("config error at " + std::string(key) + ": expected a number");
    return j.at(key).get<double>();
  };
  auto count = [&](const char* key, std::size_t fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_unsigned())
      throw std::runtime_error("config error at " + std::string(key) +
                               ": expected a nonnegative integer");
    return j.at(key).get<std::size_t>();
  };

  cfg.dgp_kind = dgp_kind_from_string(j.at("dgp_kind").get<std::string>(), "dgp_kind");
  cfg.n_train = count("n_train", cfg.n_train);
  cfg.n_sim = count("n_sim", cfg.n_sim);
  cfg.n_test = count("n_test", cfg.n_test);
  cfg.n_z = count("n_z", cfg.n_z);
  cfg.gap_low = num("gap_low", cfg.gap_low);
  cfg.gap_high = num("gap_high", cfg.gap_high);
  cfg.sigma_y = num("sigma_y", cfg.sigma_y);
  cfg.sigma_ys = num("sigma_ys", cfg.sigma_ys);
  cfg.gamma_w = num("gamma_w", cfg.gamma_w);
  cfg.lambda_tau = num("lambda_tau", cfg.lambda_tau);
  cfg.propensity_scale = num("propensity_scale", cfg.propensity_scale);
  cfg.gp_gamma_base = num("gp_gamma_base", cfg.gp_gamma_base);
  cfg.gp_gamma_tau = num("gp_gamma_tau", cfg.gp_gamma_tau);
  cfg.threads = count("threads", cfg.threads);
  if (j.contains("latents_csv")) cfg.latents_csv = j.at("latents_csv").get<std::string>();
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();

  if (j.contains("seeds")) {
    cfg.seeds.clear();
    for (const auto& s : j.at("seeds")) {
      if (!s.is_number_unsigned())
        throw std::runtime_error("config error at seeds: expected nonnegative integers");
      cfg.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  if (j.contains("estimators")) {
    cfg.estimators.clear();
    for (const auto& s : j.at("estimators")) {
      try {
        cfg.estimators.push_back(cate_kind_from_string(s.get<std::string>()));
      } catch (const std::exception& e) {
        throw std::runtime_error(std::string("config error at estimators: ") + e.what());
      }
    }
  }
  if (j.contains("extractor_mode")) {
    const std::string mode = j.at("extractor_mode").get<std::string>();
    if (mode == "oracle")
      cfg.extractor_mode = ExtractorMode::kOracle;
    else if (mode == "learned")
      cfg.extractor_mode = ExtractorMode::kLearned;
    else
      throw std::runtime_error("config error at extractor_mode: unknown mode '" + mode + "'");
  }
  if (j.contains("gap_grid")) {
    if (!j.at("gap_grid").is_array())
      throw std::runtime_error("config error at gap_grid: expected an array");
    cfg.gap_grid.clear();
    std::size_t idx = 0;
    for (const auto& cell : j.at("gap_grid")) {
      const std::string path = "gap_grid[" + std::to_string(idx) + "]";
      if (!cell.is_object())
        throw std::runtime_error("config error at " + path + ": expected an object");
      for (const auto& item : cell.items())
        if (item.key() != "gamma_r" && item.key() != "gamma_rs" && item.key() != "gamma_tau" &&
            item.key() != "gamma_w")
          throw std::runtime_error("config error at " + path + ": unknown key '" + item.key() +
                                   "'");
      try {
        cfg.gap_grid.emplace_back(get_gap_field(cell, "gamma_r", 0.0, path),
                                  get_gap_field(cell, "gamma_rs", 0.0, path),
                                  get_gap_field(cell, "gamma_tau", 0.0, path),
                                  get_gap_field(cell, "gamma_w", cfg.gamma_w, path));
      } catch (const std::invalid_argument& e) {
        throw std::runtime_error("config error at " + path + ": " + e.what());
      }
      ++idx;
    }
  }
  cfg.validate();
  return cfg;
}

SweepConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config error: cannot open " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_config(buf.str(), path);
}

Matrix load_latents_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_latents_csv: cannot open " + path);
  std::string line;
  if (!std::getline(f, line))
    throw std::runtime_error("load_latents_csv: empty file " + path);

  std::vector<Vector> rows;
  std::size_t n_cols = 0;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    Vector row;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      ++col;
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
        if (pos != cell.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw std::runtime_error("load_latents_csv: non-numeric cell at row " +
                                 std::to_string(line_no) + ", column " + std::to_string(col));
      }
    }
    if (n_cols == 0)
      n_cols = row.size();
    else if (row.size() != n_cols)
      throw std::runtime_error("load_latents_csv: ragged row " + std::to_string(line_no) +
                               " (expected " + std::to_string(n_cols) + " columns, got " +
                               std::to_string(row.size()) + ")");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("load_latents_csv: no data rows in " + path);
  Matrix z(rows.size(), n_cols);
  for (std::size_t i = 0; i < rows.size(); ++i) z.set_row(i, rows[i]);
  return z;
}

std::uint64_t cell_seed(std::uint64_t base_seed, const dgp::GapConfig& gaps) {
  std::uint64_t h = Rng::mix(0x5ca1ab1edeadbeefULL, base_seed);
  h = Rng::mix(h, Rng::hash_double(gaps.gamma_r));
  h = Rng::mix(h, Rng::hash_double(gaps.gamma_rs));
  h = Rng::mix(h, Rng::hash_double(gaps.gamma_tau));
  return h;
}

namespace {

// Substream tags for per-cell deterministic rng derivation.
enum : std::uint64_t {
  kStreamBuild = 1,
  kStreamLatents = 2,
  kStreamObs = 3,
  kStreamSim = 4,
  kStreamEval = 5,
  kStreamExtract = 6,
  kStreamHeuristic = 7,
  kStreamFit = 8,
  kStreamGp = 16,
  kStreamFlow = 17,
};

struct LatentBlocks {
  Matrix trn, sim, tst;
};

LatentBlocks cell_latents(const SweepConfig& cfg, std::uint64_t cs) {
  LatentBlocks b;
  if (!cfg.latents_csv.empty()) {
    const Matrix all = load_latents_csv(cfg.latents_csv);
    if (all.cols() != cfg.n_z)
      throw std::runtime_error("latents_csv: expected " + std::to_string(cfg.n_z) +
                               " columns, file has " + std::to_string(all.cols()));
    const std::size_t need = cfg.n_train + cfg.n_sim + cfg.n_test;
    if (all.rows() < need)
      throw std::runtime_error("latents_csv: need " + std::to_string(need) + " rows, file has " +
                               std::to_string(all.rows()));
    auto block = [&](std::size_t offset, std::size_t n) {
      Matrix m(n, cfg.n_z);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t jj = 0; jj < cfg.n_z; ++jj) m(i, jj) = all(offset + i, jj);
      return m;
    };
    b.trn = block(0, cfg.n_train);
    b.sim = block(cfg.n_train, cfg.n_sim);
    b.tst = block(cfg.n_train + cfg.n_sim, cfg.n_test);
    return b;
  }
  Rng rng(Rng::mix(cs, kStreamLatents));
  b.trn = dgp::sample_latents(cfg.n_train, cfg.n_z, rng);
  b.sim = dgp::sample_latents(cfg.n_sim, cfg.n_z, rng);
  b.tst = dgp::sample_latents(cfg.n_test, cfg.n_z, rng);
  return b;
}

// Treatment assignment + empty-arm guard shared by the gp/flow assemblies.
std::vector<int> assign_treatments(const Matrix& z, double scale, Rng& rng) {
  const Vector w_p = propensity_direction(z.cols());
  std::vector<int> t(z.rows());
  std::size_t treated = 0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    t[i] = rng.bernoulli(sigmoid(scale * la::dot(z.row(i), w_p))) ? 1 : 0;
    treated += t[i];
  }
  if (treated == 0 || treated == z.rows())
    throw std::runtime_error("assign_treatments: empty treatment arm");
  return t;
}

Matrix rows_through_map(const Matrix& z, const std::vector<int>& t, const Matrix& m0,
                        const Matrix& m1) {
  Matrix x(z.rows(), m0.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const Matrix& mt = t[i] == 0 ? m0 : m1;
    for (std::size_t j = 0; j < mt.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < z.cols(); ++k) s += z(i, k) * mt(k, j);
      x(i, j) = s;
    }
  }
  return x;
}

CellDatasets make_linear_cell(const SweepConfig& cfg, const dgp::GapConfig& gaps,
                              std::uint64_t cs) {
  CellDatasets data;
  Rng rng_build(Rng::mix(cs, kStreamBuild));
  data.pair = dgp::build_linear_pair(gaps, cfg.n_z, cfg.sigma_y, cfg.sigma_ys, rng_build);
  data.pair.propensity_scale = cfg.propensity_scale;

  LatentBlocks z = cell_latents(cfg, cs);
  Rng rng_obs(Rng::mix(cs, kStreamObs));
  // Empty-arm draws prompt a latent resample (bounded retries).
  for (int attempt = 0;; ++attempt) {
    try {
      data.d_trn = dgp::generate_observational(data.pair, z.trn, rng_obs);
      break;
    } catch (const std::runtime_error&) {
      if (attempt >= 4 || !cfg.latents_csv.empty()) throw;
      Rng rng_z(Rng::mix(cs, Rng::mix(kStreamLatents, 100 + attempt)));
      z.trn = dgp::sample_latents(cfg.n_train, cfg.n_z, rng_z);
    }
  }
  Rng rng_sim(Rng::mix(cs, kStreamSim));
  data.d_syn = dgp::generate_simulator_cf(data.pair, z.sim, rng_sim);
  Rng rng_eval(Rng::mix(cs, kStreamEval));
  data.d_tst = dgp::generate_eval(data.pair, z.tst, rng_eval);
  return data;
}

CellDatasets make_gp_cell(const SweepConfig& cfg, const dgp::GapConfig& gaps,
                          std::uint64_t cs) {
  CellDatasets data;
  Rng rng_build(Rng::mix(cs, kStreamBuild));
  data.pair = dgp::build_linear_pair(gaps, cfg.n_z, cfg.sigma_y, cfg.sigma_ys, rng_build);
  data.pair.propensity_scale = cfg.propensity_scale;

  const LatentBlocks z = cell_latents(cfg, cs);
  const Matrix z_all = la::vstack(la::vstack(z.trn, z.sim), z.tst);
  Rng rng_gp(Rng::mix(cs, kStreamGp));
  const dgp::GpOutcomeSpec gp_spec(cfg.gp_gamma_base, cfg.gp_gamma_tau, gaps.gamma_tau);
  const dgp::GpOutcomeDraw draw = dgp::sample_gp_outcome_functions(z_all, gp_spec, rng_gp);

  const std::size_t off_sim = cfg.n_train;
  const std::size_t off_tst = cfg.n_train + cfg.n_sim;

  Rng rng_obs(Rng::mix(cs, kStreamObs));
  data.d_trn.t = assign_treatments(z.trn, cfg.propensity_scale, rng_obs);
  data.d_trn.x = rows_through_map(z.trn, data.d_trn.t, data.pair.r(0), data.pair.r(1));
  data.d_trn.y.resize(cfg.n_train);
  for (std::size_t i = 0; i < cfg.n_train; ++i)
    data.d_trn.y[i] = data.d_trn.t[i] == 0 ? draw.mu0[i] : draw.mu1[i];
  if (cfg.sigma_y > 0.0)
    for (auto& v : data.d_trn.y) v += cfg.sigma_y * rng_obs.normal();

  Rng rng_sim(Rng::mix(cs, kStreamSim));
  data.d_syn.x0 = la::matmul(z.sim, data.pair.s(0));
  data.d_syn.x1 = la::matmul(z.sim, data.pair.s(1));
  data.d_syn.y0.resize(cfg.n_sim);
  data.d_syn.y1.resize(cfg.n_sim);
  for (std::size_t i = 0; i < cfg.n_sim; ++i) {
    data.d_syn.y0[i] = draw.y0s[off_sim + i];
    data.d_syn.y1[i] = draw.y1s[off_sim + i];
  }
  if (cfg.sigma_ys > 0.0) {
    for (auto& v : data.d_syn.y0) v += cfg.sigma_ys * rng_sim.normal();
    for (auto& v : data.d_syn.y1) v += cfg.sigma_ys * rng_sim.normal();
  }

  Rng rng_eval(Rng::mix(cs, kStreamEval));
  data.d_tst.z = z.tst;
  data.d_tst.t.resize(cfg.n_test);
  for (std::size_t i = 0; i < cfg.n_test; ++i)
    data.d_tst.t[i] = rng_eval.bernoulli(0.5) ? 1 : 0;
  data.d_tst.x = rows_through_map(z.tst, data.d_tst.t, data.pair.r(0), data.pair.r(1));
  data.d_tst.y0.resize(cfg.n_test);
  data.d_tst.y1.resize(cfg.n_test);
  data.d_tst.tau.resize(cfg.n_test);
  for (std::size_t i = 0; i < cfg.n_test; ++i) {
    data.d_tst.y0[i] = draw.mu0[off_tst + i];
    data.d_tst.y1[i] = draw.mu1[off_tst + i];
    data.d_tst.tau[i] = data.d_tst.y1[i] - data.d_tst.y0[i];
  }
  return data;
}

Matrix flow_rows(const dgp::CouplingFlow& f0, const dgp::CouplingFlow& f1,
                 const Matrix& z, const std::vector<int>& t) {
  const Matrix x0 = dgp::apply_coupling_flow(f0, z);
  const Matrix x1 = dgp::apply_coupling_flow(f1, z);
  Matrix x(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) x(i, j) = t[i] == 0 ? x0(i, j) : x1(i, j);
  return x;
}

CellDatasets make_flow_cell(const SweepConfig& cfg, const dgp::GapConfig& gaps,
                            std::uint64_t cs) {
  CellDatasets data;
  Rng rng_flow(Rng::mix(cs, kStreamFlow));
  const auto g0 = dgp::new_coupling_flow(cfg.n_z, 2, rng_flow);
  const auto g1 = dgp::new_coupling_flow(cfg.n_z, 2, rng_flow);
  const auto s0 = dgp::new_coupling_flow(cfg.n_z, 2, rng_flow);
  const auto s1 = dgp::new_coupling_flow(cfg.n_z, 2, rng_flow);

  const LatentBlocks z = cell_latents(cfg, cs);
  const Matrix z_all = la::vstack(la::vstack(z.trn, z.sim), z.tst);
  Rng rng_gp(Rng::mix(cs, kStreamGp));
  // Real outcomes from a GP draw; simulator effects via the scaled linear
  // perturbation, simulator baselines borrowed from the real mu_0.
  const dgp::GpOutcomeSpec gp_spec(cfg.gp_gamma_base, cfg.gp_gamma_tau, 0.0);
  const dgp::GpOutcomeDraw draw = dgp::sample_gp_outcome_functions(z_all, gp_spec, rng_gp);
  const Vector tau_s_all =
      dgp::synthesize_semisynthetic_sim_outcomes(draw.tau, z_all, gaps.gamma_tau, rng_gp);

  const std::size_t off_sim = cfg.n_train;
  const std::size_t off_tst = cfg.n_train + cfg.n_sim;

  Rng rng_obs(Rng::mix(cs, kStreamObs));
  data.d_trn.t = assign_treatments(z.trn, cfg.propensity_scale, rng_obs);
  data.d_trn.x = flow_rows(g0, g1, z.trn, data.d_trn.t);
  data.d_trn.y.resize(cfg.n_train);
  for (std::size_t i = 0; i < cfg.n_train; ++i)
    data.d_trn.y[i] = data.d_trn.t[i] == 0 ? draw.mu0[i] : draw.mu1[i];
  if (cfg.sigma_y > 0.0)
    for (auto& v : data.d_trn.y) v += cfg.sigma_y * rng_obs.normal();

  Rng rng_sim(Rng::mix(cs, kStreamSim));
  data.d_syn.x0 = dgp::apply_coupling_flow(s0, z.sim);
  data.d_syn.x1 = dgp::apply_coupling_flow(s1, z.sim);
  data.d_syn.y0.resize(cfg.n_sim);
  data.d_syn.y1.resize(cfg.n_sim);
  for (std::size_t i = 0; i < cfg.n_sim; ++i) {
    data.d_syn.y0[i] = draw.mu0[off_sim + i];
    data.d_syn.y1[i] = draw.mu0[off_sim + i] + tau_s_all[off_sim + i];
  }
  if (cfg.sigma_ys > 0.0) {
    for (auto& v : data.d_syn.y0) v += cfg.sigma_ys * rng_sim.normal();
    for (auto& v : data.d_syn.y1) v += cfg.sigma_ys * rng_sim.normal();
  }

  Rng rng_eval(Rng::mix(cs, kStreamEval));
  data.d_tst.z = z.tst;
  data.d_tst.t.resize(cfg.n_test);
  for (std::size_t i = 0; i < cfg.n_test; ++i)
    data.d_tst.t[i] = rng_eval.bernoulli(0.5) ? 1 : 0;
  data.d_tst.x = flow_rows(g0, g1, z.tst, data.d_tst.t);
  data.d_tst.y0.resize(cfg.n_test);
  data.d_tst.y1.resize(cfg.n_test);
  data.d_tst.tau.resize(cfg.n_test);
  for (std::size_t i = 0; i < cfg.n_test; ++i) {
    data.d_tst.y0[i] = draw.mu0[off_tst + i];
    data.d_tst.y1[i] = draw.mu1[off_tst + i];
    data.d_tst.tau[i] = draw.tau[off_tst + i];
  }
  return data;
}

}  // namespace

CellDatasets make_cell_datasets(const SweepConfig& cfg, const dgp::GapConfig& gaps,
                                std::uint64_t seed) {
  const std::uint64_t cs = cell_seed(seed, gaps);
  switch (cfg.dgp_kind) {
    case DgpKind::kLinear: return make_linear_cell(cfg, gaps, cs);
    case DgpKind::kGp: return make_gp_cell(cfg, gaps, cs);
    case DgpKind::kFlow: return make_flow_cell(cfg, gaps, cs);
  }
  throw std::logic_error("make_cell_datasets: unreachable");
}

EncoderPair cell_extractors(const SweepConfig& cfg, const CellDatasets& data,
                            std::uint64_t cs) {
  if (cfg.extractor_mode == ExtractorMode::kOracle)
    return contrastive::oracle_extractors(data.pair);
  if (cfg.dgp_kind != DgpKind::kFlow) return contrastive::pairwise_linear_map(data.d_syn);

  // Nonlinear covariates: contrastive mlp encoders, minibatch training.
  contrastive::ContrastiveConfig ccfg;
  ccfg.encoder_kind = Encoder::Kind::kMlp;
  ccfg.normalize = false;
  ccfg.n_z = cfg.n_z;
  ccfg.batch = std::min<std::size_t>(256, data.d_syn.x0.rows());
  ccfg.steps = 600;
  Rng rng(Rng::mix(cs, kStreamExtract));
  return contrastive::train_contrastive(data.d_syn, ccfg, rng).encoders;
}

namespace {

dgp::ObservationalDataset subset_obs(const dgp::ObservationalDataset& d,
                                     const std::vector<std::size_t>& idx) {
  dgp::ObservationalDataset out;
  out.x = Matrix(idx.size(), d.x.cols());
  out.t.resize(idx.size());
  out.y.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = 0; j < d.x.cols(); ++j) out.x(i, j) = d.x(idx[i], j);
    out.t[i] = d.t[idx[i]];
    out.y[i] = d.y[idx[i]];
  }
  return out;
}

Mlp zero_mlp(std::size_t n_in, std::size_t hidden) {
  Mlp m;
  m.w1 = Matrix(n_in, hidden);
  m.b1.assign(hidden, 0.0);
  m.w2.assign(hidden, 0.0);
  m.b2 = 0.0;
  return m;
}

std::array<std::vector<std::size_t>, 2> arm_indices(const std::vector<int>& t) {
  std::array<std::vector<std::size_t>, 2> idx;
  for (std::size_t i = 0; i < t.size(); ++i) idx[t[i]].push_back(i);
  return idx;
}

// lambda_f heuristic on a held-out split with linear reference fits.
double linear_lambda_f(const CellDatasets& data, const EncoderPair& f_tilde,
                       std::uint64_t cs) {
  Rng rng(Rng::mix(cs, kStreamHeuristic));
  const nn::StratifiedSplit split = nn::stratified_split(data.d_trn.t, 0.3, rng);
  if (split.val_idx.size() < 3) return 1.0;
  const auto sub = subset_obs(data.d_trn, split.train_idx);
  const auto val = subset_obs(data.d_trn, split.val_idx);
  const CateModel real = linear_estimators::fit_real_only_linear(sub);
  const CateModel mu = linear_estimators::fit_mu_only_linear(sub, f_tilde);
  const Vector real_sq = metrics::factual_error(real, val).second;
  const Vector mu_sq = metrics::factual_error(mu, val).second;
  return nn::select_lambda_f(real_sq, mu_sq);
}

// lambda_f heuristic with mlp reference fits (gp/flow cells).
double nn_lambda_f(const CellDatasets& data, const EncoderPair& f_tilde,
                   const nn::TrainConfig& tcfg, std::uint64_t cs) {
  Rng rng(Rng::mix(cs, kStreamHeuristic));
  const nn::StratifiedSplit split = nn::stratified_split(data.d_trn.t, 0.3, rng);
  if (split.val_idx.size() < 3) return 1.0;
  const auto sub = subset_obs(data.d_trn, split.train_idx);
  const auto val = subset_obs(data.d_trn, split.val_idx);
  const auto arms = arm_indices(sub.t);

  nn::TrainConfig ref_cfg = tcfg;
  Vector real_sq(val.y.size(), 0.0), mu_sq(val.y.size(), 0.0);
  std::array<Mlp, 2> real_nets, mu_nets;
  for (int arm = 0; arm < 2; ++arm) {
    Matrix xs(arms[arm].size(), sub.x.cols());
    Vector ys(arms[arm].size());
    for (std::size_t i = 0; i < arms[arm].size(); ++i) {
      for (std::size_t j = 0; j < sub.x.cols(); ++j) xs(i, j) = sub.x(arms[arm][i], j);
      ys[i] = sub.y[arms[arm][i]];
    }
    Rng r1(Rng::mix(cs, Rng::mix(kStreamHeuristic, 10 + arm)));
    real_nets[arm] = nn::train_factual_mlp(xs, ys, ref_cfg, r1).net;
    Rng r2(Rng::mix(cs, Rng::mix(kStreamHeuristic, 20 + arm)));
    mu_nets[arm] = nn::train_factual_mlp(f_tilde[arm].encode(xs), ys, ref_cfg, r2).net;
  }
  for (std::size_t i = 0; i < val.y.size(); ++i) {
    Matrix xi(1, val.x.cols());
    for (std::size_t j = 0; j < val.x.cols(); ++j) xi(0, j) = val.x(i, j);
    const int arm = val.t[i];
    const double pr = mlp_forward(real_nets[arm], xi)[0] - val.y[i];
    real_sq[i] = pr * pr;
    const double pm = mlp_forward(mu_nets[arm], f_tilde[arm].encode(xi))[0] - val.y[i];
    mu_sq[i] = pm * pm;
  }
  return nn::select_lambda_f(real_sq, mu_sq);
}

CateModel fit_nn_per_arm(const CellDatasets& data, const EncoderPair* f_tilde,
                         CateModel::Kind kind, const nn::TrainConfig& tcfg,
                         std::uint64_t cs) {
  const auto arms = arm_indices(data.d_trn.t);
  CateModel model;
  model.kind = kind;
  model.head_kind = CateModel::HeadKind::kMlp;
  for (int arm = 0; arm < 2; ++arm) {
    Matrix xs(arms[arm].size(), data.d_trn.x.cols());
    Vector ys(arms[arm].size());
    for (std::size_t i = 0; i < arms[arm].size(); ++i) {
      for (std::size_t j = 0; j < data.d_trn.x.cols(); ++j)
        xs(i, j) = data.d_trn.x(arms[arm][i], j);
      ys[i] = data.d_trn.y[arms[arm][i]];
    }
    Matrix features;
    if (f_tilde == nullptr) {
      model.f_hat[arm] = Encoder::identity(data.d_trn.x.cols());
      features = xs;
    } else {
      model.f_hat[arm] = (*f_tilde)[arm];
      features = (*f_tilde)[arm].encode(xs);
    }
    Rng rng(Rng::mix(cs, Rng::mix(kStreamFit, 30 + arm + (kind == CateModel::Kind::kMuOnly
                                                              ? 2
                                                              : 0))));
    model.mu_mlp[arm] = nn::train_factual_mlp(features, ys, tcfg, rng).net;
  }
  return model;
}

}  // namespace

EstimatorOutcome fit_estimator(const SweepConfig& cfg, const CellDatasets& data,
                               const EncoderPair& f_tilde, CateModel::Kind kind,
                               bool use_nn, std::uint64_t cs) {
  const std::uint64_t fit_seed = Rng::mix(cs, kStreamFit);
  EstimatorOutcome out;
  out.lambda_tau_used = 0.0;

  if (!use_nn) {
    switch (kind) {
      case CateModel::Kind::kRealOnly:
        out.model = linear_estimators::fit_real_only_linear(data.d_trn);
        break;
      case CateModel::Kind::kMuOnly:
        out.model = linear_estimators::fit_mu_only_linear(data.d_trn, f_tilde);
        break;
      case CateModel::Kind::kSimOnly:
        out.model = linear_estimators::fit_sim_only_linear(data.d_syn, f_tilde);
        break;
      case CateModel::Kind::kSimponet: {
        linear_estimators::AltMinConfig amc;
        amc.lambda_f = linear_lambda_f(data, f_tilde, fit_seed);
        amc.lambda_tau = cfg.lambda_tau;
        out.model = linear_estimators::fit_simponet_linear(data.d_trn, data.d_syn, f_tilde,
                                                           amc)
                        .first;
        out.lambda_f_used = amc.lambda_f;
        out.lambda_tau_used = amc.lambda_tau;
        break;
      }
    }
  } else {
    nn::TrainConfig tcfg = cfg.nn;
    tcfg.lambda_tau = cfg.lambda_tau;
    switch (kind) {
      case CateModel::Kind::kRealOnly:
        out.model = fit_nn_per_arm(data, nullptr, kind, tcfg, fit_seed);
        break;
      case CateModel::Kind::kMuOnly:
        out.model = fit_nn_per_arm(data, &f_tilde, kind, tcfg, fit_seed);
        break;
      case CateModel::Kind::kSimOnly: {
        Vector dy(data.d_syn.y0.size());
        for (std::size_t i = 0; i < dy.size(); ++i) dy[i] = data.d_syn.y1[i] - data.d_syn.y0[i];
        Rng rng(Rng::mix(fit_seed, 40));
        const Matrix z_tilde = f_tilde[0].encode(data.d_syn.x0);
        out.model.kind = kind;
        out.model.head_kind = CateModel::HeadKind::kMlp;
        out.model.f_hat = f_tilde;
        out.model.mu_mlp[1] = nn::train_factual_mlp(z_tilde, dy, tcfg, rng).net;
        out.model.mu_mlp[0] = zero_mlp(z_tilde.cols(), tcfg.hidden);
        break;
      }
      case CateModel::Kind::kSimponet: {
        tcfg.lambda_f = nn_lambda_f(data, f_tilde, tcfg, fit_seed);
        Rng rng(Rng::mix(fit_seed, 50));
        out.model = nn::train_simponet_nn(data.d_trn, data.d_syn, f_tilde, tcfg, rng).first;
        out.lambda_f_used = tcfg.lambda_f;
        out.lambda_tau_used = tcfg.lambda_tau;
        break;
      }
    }
  }

  const Vector pred = out.model.predict_cate(data.d_tst.x, data.d_tst.t);
  const metrics::ErrorSummary err = metrics::cate_error(pred, data.d_tst.tau);
  out.cate_mse = err.mse;
  out.cate_rmse = err.rmse;
  out.factual_mse = metrics::factual_error(out.model, data.d_trn).first;
  return out;
}

std::vector<SweepResultRow> run_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const std::vector<dgp::GapConfig> grid = cfg.grid();
  const std::size_t n_cells = grid.size();
  const std::size_t n_seeds = cfg.seeds.size();
  const std::size_t n_tasks = n_cells * n_seeds;
  const bool use_nn = cfg.dgp_kind != DgpKind::kLinear;

  std::vector<std::vector<SweepResultRow>> task_rows(n_tasks);
  const std::int64_t n_tasks_i = static_cast<std::int64_t>(n_tasks);
#pragma omp parallel for schedule(dynamic) num_threads(static_cast<int>(cfg.threads))
  for (std::int64_t task = 0; task < n_tasks_i; ++task) {
    const std::size_t cell_idx = static_cast<std::size_t>(task) / n_seeds;
    const std::size_t seed_idx = static_cast<std::size_t>(task) % n_seeds;
    const dgp::GapConfig& gaps = grid[cell_idx];
    const std::uint64_t seed = cfg.seeds[seed_idx];

    auto base_row = [&](CateModel::Kind kind) {
      SweepResultRow row;
      row.dgp_kind = to_string(cfg.dgp_kind);
      row.gamma_r = gaps.gamma_r;
      row.gamma_rs = gaps.gamma_rs;
      row.gamma_tau = gaps.gamma_tau;
      row.seed = seed;
      row.estimator = to_string(kind);
      return row;
    };

    std::vector<SweepResultRow>& rows = task_rows[static_cast<std::size_t>(task)];
    try {
      const std::uint64_t cs = cell_seed(seed, gaps);
      const CellDatasets data = make_cell_datasets(cfg, gaps, seed);
      const EncoderPair f_tilde = cell_extractors(cfg, data, cs);
      for (const CateModel::Kind kind : cfg.estimators) {
        SweepResultRow row = base_row(kind);
        try {
          const auto t0 = std::chrono::steady_clock::now();
          const EstimatorOutcome res = fit_estimator(cfg, data, f_tilde, kind, use_nn, cs);
          const auto t1 = std::chrono::steady_clock::now();
          row.cate_mse = res.cate_mse;
          row.cate_rmse = res.cate_rmse;
          row.factual_mse = res.factual_mse;
          row.fit_seconds = std::chrono::duration<double>(t1 - t0).count();
          row.lambda_f_used = res.lambda_f_used;
          row.lambda_tau_used = res.lambda_tau_used;
        } catch (const std::exception& e) {
          row.status = std::string("error: ") + e.what();
        }
        rows.push_back(std::move(row));
      }
    } catch (const std::exception& e) {
      for (const CateModel::Kind kind : cfg.estimators) {
        SweepResultRow row = base_row(kind);
        row.status = std::string("error: ") + e.what();
        rows.push_back(std::move(row));
      }
    }
  }

  std::vector<SweepResultRow> rows;
  rows.reserve(n_tasks * cfg.estimators.size());
  for (auto& tr : task_rows)
    for (auto& r : tr) rows.push_back(std::move(r));
  return rows;
}

void write_results_csv(const std::vector<SweepResultRow>& rows, const std::string& path,
                       bool include_timing) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_results_csv: cannot open " + path);
  f << "dgp_kind,gamma_r,gamma_rs,gamma_tau,seed,estimator,cate_mse,cate_rmse,factual_mse,"
       "lambda_f_used,lambda_tau_used,status";
  if (include_timing) f << ",fit_seconds";
  f << "\n";
  for (const auto& r : rows) {
    f << r.dgp_kind << "," << fmt17(r.gamma_r) << "," << fmt17(r.gamma_rs) << ","
      << fmt17(r.gamma_tau) << "," << r.seed << "," << r.estimator << "," << fmt17(r.cate_mse)
      << "," << fmt17(r.cate_rmse) << "," << fmt17(r.factual_mse) << ","
      << fmt17(r.lambda_f_used) << "," << fmt17(r.lambda_tau_used) << "," << r.status;
    if (include_timing) f << "," << fmt17(r.fit_seconds);
    f << "\n";
  }
}

std::vector<SweepResultRow> read_results_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_results_csv: cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("read_results_csv: empty file");

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  auto col = [&](const char* name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::runtime_error(std::string("read_results_csv: missing column ") + name);
  };
  const std::size_t c_kind = col("dgp_kind"), c_r = col("gamma_r"), c_rs = col("gamma_rs"),
                    c_tau = col("gamma_tau"), c_seed = col("seed"), c_est = col("estimator"),
                    c_mse = col("cate_mse"), c_rmse = col("cate_rmse"),
                    c_fmse = col("factual_mse"), c_lf = col("lambda_f_used"),
                    c_lt = col("lambda_tau_used"), c_status = col("status");

  std::vector<SweepResultRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < header.size()) cells.resize(header.size());
    SweepResultRow r;
    r.dgp_kind = cells[c_kind];
    r.gamma_r = std::stod(cells[c_r]);
    r.gamma_rs = std::stod(cells[c_rs]);
    r.gamma_tau = std::stod(cells[c_tau]);
    r.seed = std::stoull(cells[c_seed]);
    r.estimator = cells[c_est];
    r.cate_mse = std::stod(cells[c_mse]);
    r.cate_rmse = std::stod(cells[c_rmse]);
    r.factual_mse = std::stod(cells[c_fmse]);
    r.lambda_f_used = std::stod(cells[c_lf]);
    r.lambda_tau_used = std::stod(cells[c_lt]);
    r.status = cells[c_status];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ReportRow> generate_report(const std::vector<SweepResultRow>& rows,
                                       CateModel::Kind baseline) {
  if (rows.empty()) throw std::invalid_argument("generate_report: empty input");
  const std::string baseline_name = to_string(baseline);

  struct CellKey {
    std::string kind;
    double r, rs, tau;
    bool operator<(const CellKey& o) const {
      return std::tie(kind, r, rs, tau) < std::tie(o.kind, o.r, o.rs, o.tau);
    }
  };

  // Preserve first-appearance order of cells and estimators.
  std::vector<CellKey> cell_order;
  std::map<CellKey, std::vector<std::string>> est_order;
  std::map<CellKey, std::map<std::string, std::map<std::uint64_t, const SweepResultRow*>>>
      table;
  for (const auto& r : rows) {
    if (r.status != "ok") continue;
    const CellKey key{r.dgp_kind, r.gamma_r, r.gamma_rs, r.gamma_tau};
    if (!table.count(key)) cell_order.push_back(key);
    auto& ests = est_order[key];
    if (std::find(ests.begin(), ests.end(), r.estimator) == ests.end())
      ests.push_back(r.estimator);
    table[key][r.estimator][r.seed] = &r;
  }

  std::vector<ReportRow> report;
  for (const auto& key : cell_order) {
    const auto& ests = est_order[key];
    std::map<std::string, double> means;
    for (const auto& est : ests) {
      double m = 0.0;
      const auto& by_seed = table[key][est];
      for (const auto& [seed, row] : by_seed) m += row->cate_mse;
      means[est] = m / static_cast<double>(by_seed.size());
    }
    for (const auto& est : ests) {
      ReportRow rr;
      rr.dgp_kind = key.kind;
      rr.gamma_r = key.r;
      rr.gamma_rs = key.rs;
      rr.gamma_tau = key.tau;
      rr.estimator = est;
      const auto& by_seed = table[key][est];
      double mse = 0.0, rmse = 0.0;
      for (const auto& [seed, row] : by_seed) {
        mse += row->cate_mse;
        rmse += row->cate_rmse;
      }
      rr.mean_cate_mse = mse / static_cast<double>(by_seed.size());
      rr.mean_cate_rmse = rmse / static_cast<double>(by_seed.size());

      // Paired p-value against the baseline on per-seed errors.
      rr.p_value_vs_baseline = 0.5;
      if (table[key].count(baseline_name)) {
        Vector a, b;
        for (const auto& [seed, row] : table[key][baseline_name]) {
          const auto it = by_seed.find(seed);
          if (it != by_seed.end()) {
            a.push_back(row->cate_mse);
            b.push_back(it->second->cate_mse);
          }
        }
        if (a.size() >= 3) rr.p_value_vs_baseline = metrics::paired_t_test_one_sided(a, b);
      }

      const double my_mean = means[est];
      rr.rank = 1;
      for (const auto& kv : means)
        if (kv.second < my_mean) ++rr.rank;
      report.push_back(std::move(rr));
    }
  }
  return report;
}

void write_report_csv(const std::vector<ReportRow>& rows, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_report_csv: cannot open " + path);
  f << "dgp_kind,gamma_r,gamma_rs,gamma_tau,estimator,mean_cate_mse,mean_cate_rmse,"
       "p_value_vs_baseline,rank\n";
  for (const auto& r : rows) {
    f << r.dgp_kind << "," << fmt17(r.gamma_r) << "," << fmt17(r.gamma_rs) << ","
      << fmt17(r.gamma_tau) << "," << r.estimator << "," << fmt17(r.mean_cate_mse) << ","
      << fmt17(r.mean_cate_rmse) << "," << fmt17(r.p_value_vs_baseline) << "," << r.rank
      << "\n";
  }
}

// ---------------------------------------------------------------------------
// verify suites

namespace {

dgp::GapConfig random_gaps(Rng& rng) {
  return dgp::GapConfig(0.5 * rng.uniform(), 0.5 * rng.uniform(), rng.uniform(), 0.4);
}

dgp::ObservationalDataset sample_obs_retry(const dgp::LinearDgpPair& pair, std::size_t n,
                                           Rng& rng) {
  for (int attempt = 0;; ++attempt) {
    const Matrix z = dgp::sample_latents(n, pair.n_z, rng);
    try {
      return dgp::generate_observational(pair, z, rng);
    } catch (const std::runtime_error&) {
      if (attempt >= 4) throw;
    }
  }
}

}  // namespace

bool verify_analytic_match(std::uint64_t seed, std::ostream& out) {
  const std::size_t dims[3] = {2, 5, 10};
  double max_rel_point = 0.0;
  double max_rel_mean = 0.0;
  Rng rng(Rng::mix(seed, 0xa11a));

  for (std::size_t d_idx = 0; d_idx < 3; ++d_idx) {
    const std::size_t n_z = dims[d_idx];
    for (int rep = 0; rep < 20; ++rep) {
      const dgp::GapConfig gaps = random_gaps(rng);
      const dgp::LinearDgpPair pair = dgp::build_linear_pair(gaps, n_z, 0.0, 0.0, rng);
      const EncoderPair f_tilde = contrastive::oracle_extractors(pair);

      const dgp::ObservationalDataset d_trn =
          sample_obs_retry(pair, std::max<std::size_t>(8 * n_z, 40), rng);
      const Matrix z_sim = dgp::sample_latents(std::max<std::size_t>(8 * n_z, 40), n_z, rng);
      Rng rng_sim(rng.next_u64());
      const dgp::SimulatorDataset d_syn = dgp::generate_simulator_cf(pair, z_sim, rng_sim);
      const Matrix z_tst = dgp::sample_latents(50, n_z, rng);
      Rng rng_eval(rng.next_u64());
      const dgp::EvalDataset d_tst = dgp::generate_eval(pair, z_tst, rng_eval);

      const CateModel fits[3] = {
          linear_estimators::fit_sim_only_linear(d_syn, f_tilde),
          linear_estimators::fit_real_only_linear(d_trn),
          linear_estimators::fit_mu_only_linear(d_trn, f_tilde),
      };
      for (const auto& model : fits) {
        const Vector pred = model.predict_cate(d_tst.x, d_tst.t);
        double emp_mean = 0.0, ana_mean = 0.0, scale = 0.0;
        Vector emp(pred.size()), ana(pred.size());
        for (std::size_t i = 0; i < pred.size(); ++i) {
          const double e = pred[i] - d_tst.tau[i];
          emp[i] = e * e;
          ana[i] = linear_estimators::analytic_cate_error(pair, d_tst.x.row(i), d_tst.t[i],
                                                          model.kind);
          emp_mean += emp[i];
          ana_mean += ana[i];
          scale = std::max(scale, std::max(emp[i], ana[i]));
        }
        emp_mean /= static_cast<double>(pred.size());
        ana_mean /= static_cast<double>(pred.size());
        for (std::size_t i = 0; i < pred.size(); ++i) {
          const double rel = std::fabs(emp[i] - ana[i]) /
                             std::max({std::fabs(emp[i]), std::fabs(ana[i]), 1e-9 * scale,
                                       1e-12});
          max_rel_point = std::max(max_rel_point, rel);
        }
        const double rel_mean = std::fabs(emp_mean - ana_mean) /
                                std::max({std::fabs(emp_mean), std::fabs(ana_mean), 1e-12});
        max_rel_mean = std::max(max_rel_mean, rel_mean);
      }
    }
  }

  const bool ok = max_rel_point <= 1e-6 && max_rel_mean <= 1e-6;
  out << (ok ? "[ok]  " : "[FAIL]") << " analytic-match oracle: max point rel err "
      << max_rel_point << ", max mean rel err " << max_rel_mean << " (tol 1e-6)\n";
  return ok;
}

bool verify_decomposition_bound(std::uint64_t seed, std::size_t instances, std::ostream& out) {
  Rng rng(Rng::mix(seed, 0x1e22));
  const std::size_t dims[3] = {2, 5, 10};
  double min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t n_z = dims[i % 3];
    const dgp::GapConfig gaps = random_gaps(rng);
    const dgp::LinearDgpPair pair = dgp::build_linear_pair(gaps, n_z, 0.0, 0.0, rng);
    const dgp::ObservationalDataset d_trn =
        sample_obs_retry(pair, std::max<std::size_t>(8 * n_z, 40), rng);
    const CateModel model = linear_estimators::fit_real_only_linear(d_trn);
    const Matrix probe = dgp::sample_latents(200, n_z, rng);
    const int t = static_cast<int>(i % 2);
    const metrics::BoundReport rep = metrics::check_decomposition_bound(model, pair, probe, t);
    min_margin = std::min(min_margin, rep.margin);
  }
  const bool ok = min_margin >= -1e-9;
  out << (ok ? "[ok]  " : "[FAIL]") << " factual/counterfactual decomposition bound: min margin "
      << min_margin << " over " << instances << " instances (tol -1e-9)\n";
  return ok;
}

bool verify_generalization_bound(std::uint64_t seed, std::size_t instances, std::ostream& out) {
  Rng rng(Rng::mix(seed, 0x1e44));
  const std::size_t dims[3] = {2, 5, 10};
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t n_z = dims[i % 3];
    const dgp::GapConfig gaps = random_gaps(rng);
    const dgp::LinearDgpPair pair = dgp::build_linear_pair(gaps, n_z, 0.0, 0.0, rng);
    const dgp::ObservationalDataset d_trn =
        sample_obs_retry(pair, std::max<std::size_t>(20 * n_z, 100), rng);
    const Matrix z_sim = dgp::sample_latents(std::max<std::size_t>(20 * n_z, 100), n_z, rng);
    Rng rng_sim(rng.next_u64());
    const dgp::SimulatorDataset d_syn = dgp::generate_simulator_cf(pair, z_sim, rng_sim);

    const EncoderPair f_tilde = contrastive::pairwise_linear_map(d_syn);
    const CateModel sim_fit = linear_estimators::fit_sim_only_linear(d_syn, f_tilde);
    linear_estimators::AltMinConfig amc;
    const CateModel model =
        linear_estimators::fit_simponet_linear(d_trn, d_syn, f_tilde, amc).first;

    const Matrix probe = dgp::sample_latents(300, n_z, rng);
    const int t = static_cast<int>(i % 2);
    const metrics::BoundReport rep = metrics::check_generalization_bound(
        model, pair, f_tilde, sim_fit.mu_linear[1], probe, t);
    const double rel_margin = rep.margin / std::max(1.0, rep.rhs);
    worst = std::min(worst, rel_margin);
  }
  const bool ok = worst >= -1e-6;
  out << (ok ? "[ok]  " : "[FAIL]")
      << " simulator-assisted generalization bound: min margin/max(1,rhs) " << worst
      << " over " << instances << " instances (tol -1e-6)\n";
  return ok;
}

int run_verify(std::uint64_t seed, std::ostream& out) {
  bool ok = true;
  ok = verify_analytic_match(seed, out) && ok;
  ok = verify_decomposition_bound(seed, 100, out) && ok;
  ok = verify_generalization_bound(seed, 50, out) && ok;
  out << (ok ? "verify: all property suites passed\n" : "verify: FAILURES detected\n");
  return ok ? 0 : 1;
}

}  // namespace simcate::harness
