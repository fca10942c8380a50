#include <chrono>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "depcens/io.hpp"

using namespace depcens;

namespace {

void add_fit_options(CLI::App& app, RunConfig& cfg, std::string& copula) {
  app.add_option("--copula", copula, "Copula family")
      ->check(CLI::IsMember({"frank", "gaussian", "gumbel"}));
  app.add_option("--tol-theta", cfg.fit.tol_theta, "Parameter tolerance");
  app.add_option("--tol-h", cfg.fit.tol_h, "Jump-size tolerance");
  app.add_option("--max-iters", cfg.fit.max_outer_iters, "Maximum outer iterations");
  app.add_option("--b", cfg.B, "Bootstrap replicates");
  app.add_option("--seed", cfg.seed, "Random seed");
  app.add_option("--threads", cfg.threads, "Worker threads (overrides DEPCENS_THREADS)");
  app.add_option("-o,--output", cfg.output, "Output JSON")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transformation model with dependent censoring: fitting, goodness of fit, simulation"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string copula = "frank";
  std::string scenario = "s1_h1";

  CLI::App* fit = app.add_subcommand("fit", "Fit the model to a CSV dataset");
  add_fit_options(*fit, cfg, copula);
  fit->add_option("-i,--input", cfg.input, "Input CSV")->required()->check(CLI::ExistingFile);

  CLI::App* gof = app.add_subcommand("gof", "Fit and run the bootstrap goodness-of-fit test");
  add_fit_options(*gof, cfg, copula);
  gof->add_option("-i,--input", cfg.input, "Input CSV")->required()->check(CLI::ExistingFile);
  gof->add_option("--curve", cfg.table_output, "CSV of (v, F_KM, F_V); default <output stem>.csv");

  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo study of one scenario");
  add_fit_options(*sim, cfg, copula);
  sim->add_option("--scenario", scenario, "s1_h1, s1_h2, s2, s3_gumbel, s3_gaussian or s4_case");
  sim->add_option("--n", cfg.n, "Sample size");
  sim->add_option("--runs", cfg.runs, "Number of datasets");
  sim->add_option("--case", cfg.gof_case, "Goodness-of-fit case for s4_case (1, 2 or 3)");
  sim->add_option("--table", cfg.table_output, "Summary CSV; default <output stem>.csv");
  sim->add_option("--data-out", cfg.data_output, "Also write the first generated dataset");

  CLI::App* bench = app.add_subcommand("benchmark", "50-run scenario 1 study, timed");
  add_fit_options(*bench, cfg, copula);
  bench->add_option("--n", cfg.n, "Sample size");
  bench->add_option("--runs", cfg.runs, "Number of datasets");
  bench->add_option("--table", cfg.table_output, "Summary CSV; default <output stem>.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    cfg.spec.copula = copula_family_from_string(copula);
    if (fit->parsed()) cfg.command = Command::Fit;
    if (gof->parsed()) {
      cfg.command = Command::Gof;
      if (gof->count("--b") == 0) cfg.B = 100;
    }
    if (sim->parsed()) {
      cfg.command = Command::Simulate;
      cfg.scenario = scenario_from_string(scenario);
    }
    if (bench->parsed()) cfg.command = Command::Benchmark;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  const auto start = std::chrono::steady_clock::now();
  const int code = run(cfg, std::cerr);
  if (cfg.command == Command::Benchmark) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cerr << "wall time " << secs << " s\n";
  }
  return code;
}
