#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netsr/bench.hpp"
#include "run_config.hpp"

namespace netsr::cli {

struct FitPaths {
  std::filesystem::path report = "fit_report.json";
  std::filesystem::path history = "fit_history.json";
};

/// Fits the CSV on a seeded train/test split, writes the report and history,
/// prints a summary to `out` and returns the report.
nlohmann::json cmd_fit(const std::filesystem::path& csv, const RunConfig& config, const FitPaths& paths,
                       std::ostream& out, std::ostream* log = nullptr);

struct ProblemResult {
  std::string name;
  std::string family;
  /// Test R^2 per run; NaN when the best expression is not finite on the test set.
  std::vector<double> r2;
  std::vector<std::string> expressions;
  std::vector<double> seconds;

  double mean_r2() const;
  double stderr_r2() const;
  double best_r2() const;
};

/// Runs every problem `config.runs` times with training noise `noise_level`.
std::vector<ProblemResult> run_benchmark(const std::vector<BenchmarkProblem>& problems, const RunConfig& config,
                                         double noise_level, std::ostream* log = nullptr);

/// Fraction of problems whose best run has test R^2 above 0.99.
double suite_solution_rate(const std::vector<ProblemResult>& results);

struct BenchmarkPaths {
  std::filesystem::path csv = "benchmark.csv";
  std::filesystem::path json = "benchmark.json";
};

nlohmann::json cmd_benchmark(const std::string& suite, const RunConfig& config, const BenchmarkPaths& paths,
                             std::ostream& out, std::ostream* log = nullptr);

/// One row per noise level: level, solution rate.
std::vector<std::pair<double, double>> cmd_noise_sweep(const std::string& suite, const RunConfig& config,
                                                       const std::filesystem::path& csv, std::ostream& out,
                                                       std::ostream* log = nullptr);

/// Writes x columns, y (when present), y_hat and a validity flag.
void cmd_predict(const std::string& expression, const std::filesystem::path& csv, std::ostream& out);

void cmd_list_suites(std::ostream& out);

}  // namespace netsr::cli
