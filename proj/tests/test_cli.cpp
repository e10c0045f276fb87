// End-to-end smoke of the command-line surface: gen -> fit -> sweep -> report,
// plus config error handling. Takes the binary path via --cli.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace {

int g_failures = 0;

void check(bool ok, const std::string& what) {
  std::printf("[%s] %s\n", ok ? "ok" : "FAIL", what.c_str());
  if (!ok) ++g_failures;
}

bool exists(const std::string& path) {
  std::ifstream f(path);
  return f.good();
}

int run(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--cli") cli = argv[i + 1];
  if (cli.empty()) {
    std::cerr << "usage: test_cli --cli <simcate binary>\n";
    return 1;
  }
  const std::string q = "\"" + cli + "\"";
  const int rc_rm = std::system("rm -rf cli_smoke && mkdir -p cli_smoke");
  (void)rc_rm;

  {
    std::ofstream cfg("cli_smoke/cfg.json");
    cfg << R"({"dgp_kind":"linear","n_train":120,"n_sim":120,"n_test":60,"n_z":3,)"
        << R"("seeds":[0,1,2],"extractor_mode":"learned",)"
        << R"("gap_grid":[{"gamma_r":0.1,"gamma_rs":0.1,"gamma_tau":0.4}]})";
  }

  check(run(q + " gen --config cli_smoke/cfg.json --out cli_smoke/data --seed 1") == 0,
        "gen exits zero");
  check(exists("cli_smoke/data/obs.csv") && exists("cli_smoke/data/sim.csv") &&
            exists("cli_smoke/data/eval.csv"),
        "gen wrote the three dataset files");

  for (const std::string est : {"real_only", "mu_only", "sim_only", "simponet"}) {
    check(run(q + " fit --estimator " + est +
              " --data cli_smoke/data --out cli_smoke/fit_" + est) == 0,
          "fit " + est + " exits zero");
    check(exists("cli_smoke/fit_" + est + "/model.json") &&
              exists("cli_smoke/fit_" + est + "/metrics.json"),
          "fit " + est + " wrote model and metrics");
  }

  check(run(q + " sweep --config cli_smoke/cfg.json --out cli_smoke/swp --threads 2") == 0,
        "sweep exits zero");
  check(exists("cli_smoke/swp/results.csv") && exists("cli_smoke/swp/timings.csv"),
        "sweep wrote results and timings");

  check(run(q + " report --results cli_smoke/swp/results.csv --out cli_smoke/report.csv") == 0,
        "report exits zero");
  check(exists("cli_smoke/report.csv"), "report wrote the aggregate CSV");
  {
    std::ifstream f("cli_smoke/report.csv");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(f, line)) ++lines;
    check(lines == 1 + 4, "report has one row per estimator");
  }

  // Config errors surface as nonzero exits.
  {
    std::ofstream bad("cli_smoke/bad.json");
    bad << R"({"dgp_kind":"linear","gamm_r":0.1})";
  }
  check(run(q + " sweep --config cli_smoke/bad.json --out cli_smoke/nope") != 0,
        "unknown config key is rejected");
  check(run(q + " fit --estimator bogus --data cli_smoke/data --out cli_smoke/nope") != 0,
        "unknown estimator is rejected");

  const int rc_clean = std::system("rm -rf cli_smoke");
  (void)rc_clean;
  if (g_failures == 0) return 0;
  std::printf("%d CLI check(s) failed\n", g_failures);
  return 1;
}
