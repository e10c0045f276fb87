#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "simcate/cate_model.hpp"
#include "simcate/contrastive.hpp"
#include "simcate/dgp.hpp"
#include "simcate/linear_estimators.hpp"
#include "simcate/metrics.hpp"
#include "simcate/nn_trainer.hpp"

namespace simcate::harness {

using la::Matrix;
using la::Vector;

enum class DgpKind { kLinear, kGp, kFlow };
enum class ExtractorMode { kOracle, kLearned };

struct SweepConfig {
  DgpKind dgp_kind = DgpKind::kLinear;
  std::size_t n_train = 1000;
  std::size_t n_sim = 1000;
  std::size_t n_test = 500;
  std::size_t n_z = 10;
  double gap_low = 0.1;
  double gap_high = 0.4;
  std::vector<dgp::GapConfig> gap_grid;  // empty = default 9-cell grid
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<CateModel::Kind> estimators = {
      CateModel::Kind::kSimOnly, CateModel::Kind::kRealOnly, CateModel::Kind::kMuOnly,
      CateModel::Kind::kSimponet};
  ExtractorMode extractor_mode = ExtractorMode::kOracle;
  double sigma_y = 0.0;
  double sigma_ys = 0.0;
  double gamma_w = 0.4;
  double lambda_tau = 1.0;
  double propensity_scale = 0.0;
  double gp_gamma_base = 1.0;
  double gp_gamma_tau = 0.4;
  std::string latents_csv;
  std::string output_dir = "out";
  std::size_t threads = 1;

  // Trainer settings for gp/flow cells; not part of the JSON schema.
  nn::TrainConfig nn;

  void validate() const;
  /// gap_grid, or the default grid: the zero-gamma_r cell plus every
  /// low/high combination over the three dials.
  std::vector<dgp::GapConfig> grid() const;
};

/// Strict JSON config load: unknown keys rejected, defaults filled, every
/// error names the offending key path.
SweepConfig load_config(const std::string& path);
SweepConfig parse_config(const std::string& json_text, const std::string& origin);

/// Rectangular numeric CSV with a header row.
Matrix load_latents_csv(const std::string& path);

struct SweepResultRow {
  std::string dgp_kind;
  double gamma_r = 0.0;
  double gamma_rs = 0.0;
  double gamma_tau = 0.0;
  std::uint64_t seed = 0;
  std::string estimator;
  double cate_mse = 0.0;
  double cate_rmse = 0.0;
  double factual_mse = 0.0;
  double fit_seconds = 0.0;
  double lambda_f_used = 0.0;
  double lambda_tau_used = 0.0;
  std::string status = "ok";
};

/// Stable 64-bit cell seed from the base seed and the gap coordinates.
std::uint64_t cell_seed(std::uint64_t base_seed, const dgp::GapConfig& gaps);

/// Runs every (cell, seed) task, optionally in parallel; output order is
/// canonical (grid-major, then seed, then estimator) regardless of thread
/// count, and per-cell failures become error rows instead of aborting.
std::vector<SweepResultRow> run_sweep(const SweepConfig& cfg);

/// Canonical results CSV. Timing is written only on request: wall-clock
/// values are not reproducible, and the default output must be byte-stable
/// across thread counts.
void write_results_csv(const std::vector<SweepResultRow>& rows, const std::string& path,
                       bool include_timing = false);
std::vector<SweepResultRow> read_results_csv(const std::string& path);

struct ReportRow {
  std::string dgp_kind;
  double gamma_r = 0.0;
  double gamma_rs = 0.0;
  double gamma_tau = 0.0;
  std::string estimator;
  double mean_cate_mse = 0.0;
  double mean_cate_rmse = 0.0;
  double p_value_vs_baseline = 0.5;
  int rank = 0;
};

/// Per-(cell, estimator) aggregation: mean errors across seeds, one-sided
/// paired p-value against the baseline's per-seed errors, and per-cell rank.
std::vector<ReportRow> generate_report(
    const std::vector<SweepResultRow>& rows,
    CateModel::Kind baseline = CateModel::Kind::kSimponet);
void write_report_csv(const std::vector<ReportRow>& rows, const std::string& path);

struct CellDatasets {
  // Covariate maps for linear/gp cells and outcome heads for linear cells;
  // flow cells keep their coupling flows internal and leave this unused.
  dgp::LinearDgpPair pair;
  dgp::ObservationalDataset d_trn;
  dgp::SimulatorDataset d_syn;
  dgp::EvalDataset d_tst;
};

/// Builds the three datasets for one grid cell under the cell seed.
CellDatasets make_cell_datasets(const SweepConfig& cfg, const dgp::GapConfig& gaps,
                                std::uint64_t seed);

struct EstimatorOutcome {
  CateModel model;
  double cate_mse = 0.0;
  double cate_rmse = 0.0;
  double factual_mse = 0.0;
  double lambda_f_used = 0.0;
  double lambda_tau_used = 0.0;
};

/// Fits one estimator on prepared datasets and evaluates it. `use_nn`
/// selects the gradient-trained nonlinear heads (gp/flow cells); `cs` is the
/// cell seed from cell_seed().
EstimatorOutcome fit_estimator(const SweepConfig& cfg, const CellDatasets& data,
                               const EncoderPair& f_tilde, CateModel::Kind kind,
                               bool use_nn, std::uint64_t cs);

/// Extractors for a cell per the configured mode.
EncoderPair cell_extractors(const SweepConfig& cfg, const CellDatasets& data,
                            std::uint64_t cs);

// Property suites behind the `verify` subcommand. Each returns true on pass
// and prints one summary line.
bool verify_analytic_match(std::uint64_t seed, std::ostream& out);
bool verify_decomposition_bound(std::uint64_t seed, std::size_t instances, std::ostream& out);
bool verify_generalization_bound(std::uint64_t seed, std::size_t instances, std::ostream& out);

/// Runs all property suites; returns a process exit code (0 = healthy).
int run_verify(std::uint64_t seed, std::ostream& out);

}  // namespace simcate::harness
