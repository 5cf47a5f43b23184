#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "commands.hpp"
#include "run_config.hpp"

namespace {

using netsr::cli::RunConfig;

// Flags shared by every subcommand that runs a search.
struct CommonFlags {
  std::string config_file;
  std::vector<std::string> assignments;
  bool quick = false;
  bool verbose = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers, epochs, batch, n1, n2, runs;
  std::optional<double> stop_r2, reward_threshold;
  std::optional<int> digits;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "Key=value configuration file")->check(CLI::ExistingFile);
    app->add_option("--set", assignments, "Override one configuration key (key=value); repeatable");
    app->add_flag("--quick", quick, "Reduced budget: n1=n2=2000, M=20, N=5");
    app->add_flag("-v,--verbose", verbose, "Log per-epoch progress to stderr");
    app->add_option("--seed", seed, "Master seed");
    app->add_option("--workers", workers, "Parallel candidate trainings");
    app->add_option("--epochs", epochs, "Search epochs (M)");
    app->add_option("--batch", batch, "Architectures per epoch (N)");
    app->add_option("--n1", n1, "Stage-1 training epochs");
    app->add_option("--n2", n2, "Stage-2 training epochs");
    app->add_option("--stop-r2", stop_r2, "Also stop once training R^2 reaches this value");
    app->add_option("--reward-threshold", reward_threshold, "Early-stop reward threshold");
    app->add_option("--digits", digits, "Significant digits when printing expressions");
  }

  RunConfig resolve() const {
    RunConfig c;
    if (!config_file.empty()) netsr::cli::apply_config_file(c, config_file);
    if (quick) c.apply_quick();
    for (const auto& a : assignments) netsr::cli::apply_assignment(c, a);
    if (seed) c.seed = *seed;
    if (workers) c.search.workers = *workers;
    if (epochs) c.search.epochs = *epochs;
    if (batch) c.search.batch = *batch;
    if (n1) c.search.train.stage1_epochs = *n1;
    if (n2) c.search.train.stage2_epochs = *n2;
    if (runs) c.runs = *runs;
    if (stop_r2) c.search.stop_r2 = *stop_r2;
    if (reward_threshold) c.search.reward_threshold = *reward_threshold;
    if (digits) c.digits = *digits;
    c.validate();
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symbolic regression with controller-sampled symbolic networks"};
  app.require_subcommand(1);

  CommonFlags fit_flags, bench_flags, noise_flags;

  auto* fit = app.add_subcommand("fit", "Search for an expression fitting a CSV dataset");
  std::string fit_csv;
  netsr::cli::FitPaths fit_paths;
  std::string report_path = fit_paths.report.string(), history_path = fit_paths.history.string();
  fit->add_option("data", fit_csv, "CSV with header x1..xd,y")->required();
  fit->add_option("--report", report_path, "JSON report path")->capture_default_str();
  fit->add_option("--history", history_path, "Run-history JSON path")->capture_default_str();
  fit_flags.attach(fit);

  auto* bench = app.add_subcommand("benchmark", "Run a benchmark suite");
  std::string bench_suite;
  netsr::cli::BenchmarkPaths bench_paths;
  std::string bench_csv = bench_paths.csv.string(), bench_json = bench_paths.json.string();
  bench->add_option("--suite", bench_suite, "Suite, family, problem name or comma list")->required();
  bench->add_option("--runs", bench_flags.runs, "Runs per problem (default 3)");
  bench->add_option("--csv", bench_csv, "Per-problem CSV output")->capture_default_str();
  bench->add_option("--json", bench_json, "JSON output")->capture_default_str();
  bench_flags.attach(bench);

  auto* noise = app.add_subcommand("noise-sweep", "Solution rate against training-noise level");
  std::string noise_suite, noise_csv = "noise_sweep.csv";
  std::vector<double> levels;
  noise->add_option("--suite", noise_suite, "Suite, family, problem name or comma list")->required();
  noise->add_option("--levels", levels, "Noise levels (default 0,1e-3,1e-2,1e-1)")->delimiter(',');
  noise->add_option("--runs", noise_flags.runs, "Runs per problem (default 3)");
  noise->add_option("--csv", noise_csv, "Output CSV (level,solution_rate)")->capture_default_str();
  noise_flags.attach(noise);

  auto* predict = app.add_subcommand("predict", "Evaluate an expression on a CSV");
  std::string expression, predict_csv, predict_out;
  predict->add_option("expression", expression, "Infix expression in x1..xd")->required();
  predict->add_option("data", predict_csv, "CSV with header x1..xd[,y]")->required();
  predict->add_option("-o,--output", predict_out, "Output CSV (default stdout)");

  auto* list = app.add_subcommand("list-suites", "List benchmark suites and their problems");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) {
      const RunConfig c = fit_flags.resolve();
      fit_paths.report = report_path;
      fit_paths.history = history_path;
      netsr::cli::cmd_fit(fit_csv, c, fit_paths, std::cout, fit_flags.verbose ? &std::cerr : nullptr);
    } else if (bench->parsed()) {
      const RunConfig c = bench_flags.resolve();
      bench_paths.csv = bench_csv;
      bench_paths.json = bench_json;
      netsr::cli::cmd_benchmark(bench_suite, c, bench_paths, std::cout, bench_flags.verbose ? &std::cerr : nullptr);
    } else if (noise->parsed()) {
      RunConfig c = noise_flags.resolve();
      if (!levels.empty()) {
        c.noise_levels = levels;
        c.validate();
      }
      netsr::cli::cmd_noise_sweep(noise_suite, c, noise_csv, std::cout, noise_flags.verbose ? &std::cerr : nullptr);
    } else if (predict->parsed()) {
      if (predict_out.empty()) {
        netsr::cli::cmd_predict(expression, predict_csv, std::cout);
      } else {
        std::ofstream f(predict_out);
        if (!f) throw std::runtime_error("cannot write '" + predict_out + "'");
        netsr::cli::cmd_predict(expression, predict_csv, f);
      }
    } else if (list->parsed()) {
      netsr::cli::cmd_list_suites(std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
