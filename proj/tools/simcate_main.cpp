#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "simcate/harness.hpp"

namespace {

namespace fs = std::filesystem;
using namespace simcate;

int cmd_gen(const std::string& config_path, const std::string& out_dir, std::uint64_t seed,
            std::size_t cell_idx) {
  const harness::SweepConfig cfg = harness::load_config(config_path);
  const auto grid = cfg.grid();
  if (cell_idx >= grid.size()) {
    std::cerr << "gen: cell index " << cell_idx << " out of range (grid has " << grid.size()
              << " cells)\n";
    return 1;
  }
  fs::create_directories(out_dir);
  const harness::CellDatasets data = harness::make_cell_datasets(cfg, grid[cell_idx], seed);
  dgp::write_observational_csv(data.d_trn, out_dir + "/obs.csv");
  dgp::write_simulator_csv(data.d_syn, out_dir + "/sim.csv");
  dgp::write_eval_csv(data.d_tst, out_dir + "/eval.csv");
  std::cout << "gen: wrote obs.csv (" << data.d_trn.x.rows() << " rows), sim.csv ("
            << data.d_syn.x0.rows() << "), eval.csv (" << data.d_tst.x.rows() << ") to "
            << out_dir << "\n";
  return 0;
}

int cmd_fit(const std::string& estimator, const std::string& data_dir,
            const std::string& out_dir, bool use_nn, std::uint64_t seed, double lambda_tau) {
  const CateModel::Kind kind = cate_kind_from_string(estimator);
  harness::SweepConfig cfg;
  cfg.lambda_tau = lambda_tau;
  cfg.extractor_mode = harness::ExtractorMode::kLearned;

  harness::CellDatasets data;
  data.d_trn = dgp::read_observational_csv(data_dir + "/obs.csv");
  data.d_syn = dgp::read_simulator_csv(data_dir + "/sim.csv");
  const std::string eval_path = data_dir + "/eval.csv";
  const bool have_eval = fs::exists(eval_path);
  if (have_eval) data.d_tst = dgp::read_eval_csv(eval_path);

  const EncoderPair f_tilde = contrastive::pairwise_linear_map(data.d_syn);
  const std::uint64_t cs = harness::cell_seed(seed, dgp::GapConfig());

  harness::EstimatorOutcome out;
  if (have_eval) {
    out = harness::fit_estimator(cfg, data, f_tilde, kind, use_nn, cs);
  } else {
    // No ground truth: fit only, skip CATE metrics.
    harness::CellDatasets with_dummy = data;
    with_dummy.d_tst.x = data.d_trn.x;
    with_dummy.d_tst.t = data.d_trn.t;
    with_dummy.d_tst.tau.assign(data.d_trn.x.rows(), 0.0);
    out = harness::fit_estimator(cfg, with_dummy, f_tilde, kind, use_nn, cs);
    out.cate_mse = out.cate_rmse = 0.0;
  }

  fs::create_directories(out_dir);
  {
    std::ofstream f(out_dir + "/model.json");
    f << out.model.to_json_string() << "\n";
  }
  {
    std::ofstream f(out_dir + "/metrics.json");
    f << "{\n  \"estimator\": \"" << estimator << "\",\n  \"factual_mse\": " << out.factual_mse;
    if (have_eval)
      f << ",\n  \"cate_mse\": " << out.cate_mse << ",\n  \"cate_rmse\": " << out.cate_rmse;
    f << ",\n  \"lambda_f_used\": " << out.lambda_f_used
      << ",\n  \"lambda_tau_used\": " << out.lambda_tau_used << "\n}\n";
  }
  std::cout << "fit: " << estimator << " factual_mse=" << out.factual_mse;
  if (have_eval) std::cout << " cate_mse=" << out.cate_mse;
  std::cout << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              std::size_t threads_override) {
  harness::SweepConfig cfg = harness::load_config(config_path);
  if (threads_override > 0) cfg.threads = threads_override;
  const std::string dir = out_dir.empty() ? cfg.output_dir : out_dir;
  fs::create_directories(dir);

  const auto rows = harness::run_sweep(cfg);
  harness::write_results_csv(rows, dir + "/results.csv");
  harness::write_results_csv(rows, dir + "/timings.csv", /*include_timing=*/true);

  std::size_t errors = 0;
  for (const auto& r : rows)
    if (r.status != "ok") ++errors;
  std::cout << "sweep: " << rows.size() << " rows (" << errors << " errors) -> " << dir
            << "/results.csv\n";
  return 0;
}

int cmd_report(const std::string& results_path, const std::string& out_path,
               const std::string& baseline) {
  const auto rows = harness::read_results_csv(results_path);
  const auto report = harness::generate_report(rows, cate_kind_from_string(baseline));
  harness::write_report_csv(report, out_path);
  std::cout << "report: " << report.size() << " rows -> " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simcate: simulator-assisted CATE estimation workbench"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_dir, estimator, results_path, baseline = "simponet";
  std::uint64_t seed = 0;
  std::size_t threads = 0, cell_idx = 0;
  bool use_nn = false;
  double lambda_tau = 1.0;

  auto* gen = app.add_subcommand("gen", "emit datasets for one DGP grid cell");
  gen->add_option("--config", config_path, "sweep config JSON")->required();
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--seed", seed, "base seed");
  gen->add_option("--cell", cell_idx, "grid cell index");

  auto* fit = app.add_subcommand("fit", "train one estimator from dataset files");
  fit->add_option("--estimator", estimator, "sim_only|real_only|mu_only|simponet")->required();
  fit->add_option("--data", data_dir, "directory with obs.csv/sim.csv[/eval.csv]")->required();
  fit->add_option("--out", out_dir, "output directory")->required();
  fit->add_flag("--nn", use_nn, "gradient-trained nonlinear outcome heads");
  fit->add_option("--seed", seed, "fit seed");
  fit->add_option("--lambda-tau", lambda_tau, "simulated-effect loss weight");

  auto* sweep = app.add_subcommand("sweep", "run the full gap-grid sweep");
  sweep->add_option("--config", config_path, "sweep config JSON")->required();
  sweep->add_option("--out", out_dir, "output directory (default: config output_dir)");
  sweep->add_option("--threads", threads, "worker threads (overrides config)");

  auto* report = app.add_subcommand("report", "aggregate results with p-values and ranks");
  report->add_option("--results", results_path, "results.csv from sweep")->required();
  report->add_option("--out", out_dir, "output report CSV path")->required();
  report->add_option("--baseline", baseline, "baseline estimator for p-values");

  auto* verify = app.add_subcommand("verify", "run the bound and oracle property suites");
  verify->add_option("--seed", seed, "suite seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(config_path, out_dir, seed, cell_idx);
    if (fit->parsed()) return cmd_fit(estimator, data_dir, out_dir, use_nn, seed, lambda_tau);
    if (sweep->parsed()) return cmd_sweep(config_path, out_dir, threads);
    if (report->parsed()) return cmd_report(results_path, out_dir, baseline);
    if (verify->parsed()) return harness::run_verify(seed, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
