#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "netsr/rng.hpp"
#include "netsr/search.hpp"

namespace netsr::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << text;
}

std::string quote_csv(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string num(double v, int digits = 6) {
  if (!std::isfinite(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// R^2 of an expression on a dataset; NaN when any prediction is not finite.
double test_r2(const Expression& e, const Dataset& data) {
  const std::vector<double> pred = evaluate(e, data.x, false);
  for (double v : pred)
    if (!std::isfinite(v)) return std::numeric_limits<double>::quiet_NaN();
  return r_squared(data.y, pred);
}

EpochCallback epoch_logger(std::ostream* log, const std::string& prefix) {
  if (!log) return {};
  return [log, prefix](const EpochSummary& e) {
    *log << prefix << "epoch " << e.epoch << "  mean reward " << num(e.mean_reward, 4) << "  best "
         << num(e.best_reward, 8) << "  (" << num(e.seconds, 3) << "s)\n";
  };
}

SearchConfig seeded(const RunConfig& config, std::uint64_t seed) {
  SearchConfig s = config.search;
  s.seed = seed;
  return s;
}

}  // namespace

nlohmann::json cmd_fit(const std::filesystem::path& csv, const RunConfig& config, const FitPaths& paths,
                       std::ostream& out, std::ostream* log) {
  const auto start = Clock::now();
  config.validate();
  const Dataset data = read_csv(csv);
  if (data.rows() < 10) throw std::invalid_argument(csv.string() + ": need at least 10 rows, got " +
                                                    std::to_string(data.rows()));
  {
    const double first = data.y.front();
    bool constant = true;
    for (double v : data.y) constant = constant && v == first;
    if (constant) throw std::invalid_argument(csv.string() + ": target column is constant, R^2 is undefined");
  }

  // Seeded shuffle, then the first part trains and the rest tests.
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(config.seed, {100}));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto n_test = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.test_fraction * static_cast<double>(data.rows()))));
  const std::size_t n_train = data.rows() - n_test;
  const Dataset train = data.subset({order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train)},
                                    Split::Train);
  const Dataset test = data.subset({order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end()}, Split::Test);

  const SearchResult result = run_search(train, seeded(config, config.seed), epoch_logger(log, ""));
  const CandidateRecord& best = result.best;

  double train_mse = std::numeric_limits<double>::quiet_NaN();
  double train_r2 = std::numeric_limits<double>::quiet_NaN();
  double r2_test = std::numeric_limits<double>::quiet_NaN();
  std::string expression;
  std::size_t size = 0;
  if (!best.failed) {
    expression = to_string(best.refined, {17});
    size = complexity(best.refined);
    const std::vector<double> pred = evaluate(best.refined, train.x, false);
    train_mse = mean_squared_error(train.y, pred);
    train_r2 = test_r2(best.refined, train);
    r2_test = test_r2(best.refined, test);
  }

  nlohmann::json history = history_to_json(result);
  write_text(paths.history, history.dump(2) + "\n");

  nlohmann::json report = {
      {"config", config.to_json()},
      {"problem", {{"source", csv.string()}, {"rows", data.rows()}, {"dims", data.dims()},
                   {"train_rows", train.rows()}, {"test_rows", test.rows()}}},
      {"best_expression", expression},
      {"architecture", best.sample.descriptor.str()},
      {"train_mse", finite_or_null(train_mse)},
      {"train_r2", finite_or_null(train_r2)},
      {"test_r2", finite_or_null(r2_test)},
      {"complexity", size},
      {"epochs_run", result.epochs_run},
      {"early_stopped", result.early_stopped},
      {"history_path", paths.history.string()},
      {"seed", config.seed},
      {"timings", {{"search_seconds", result.seconds}, {"total_seconds", seconds_since(start)}}},
  };
  write_text(paths.report, report.dump(2) + "\n");

  out << "expression:  " << (best.failed ? "(none)" : to_string(best.refined, {config.digits})) << "\n"
      << "train MSE:   " << num(train_mse) << "\n"
      << "train R^2:   " << num(train_r2, 8) << "\n"
      << "test R^2:    " << num(r2_test, 8) << "\n"
      << "complexity:  " << size << "\n"
      << "epochs:      " << result.epochs_run << (result.early_stopped ? " (early stop)" : "") << "\n"
      << "wall time:   " << num(seconds_since(start), 4) << "s\n"
      << "report:      " << paths.report.string() << "\n";
  return report;
}

double ProblemResult::mean_r2() const {
  double s = 0.0;
  std::size_t n = 0;
  for (double v : r2) {
    if (std::isfinite(v)) {
      s += v;
      ++n;
    }
  }
  return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

double ProblemResult::stderr_r2() const {
  std::vector<double> v;
  for (double x : r2)
    if (std::isfinite(x)) v.push_back(x);
  if (v.size() < 2) return 0.0;
  const double m = mean_r2();
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
}

double ProblemResult::best_r2() const {
  double b = -std::numeric_limits<double>::infinity();
  for (double v : r2)
    if (std::isfinite(v)) b = std::max(b, v);
  return b;
}

std::vector<ProblemResult> run_benchmark(const std::vector<BenchmarkProblem>& problems, const RunConfig& config,
                                         double noise_level, std::ostream* log) {
  config.validate();
  std::vector<ProblemResult> results;
  for (const auto& problem : problems) {
    ProblemResult pr;
    pr.name = problem.name;
    pr.family = problem.family;
    const Dataset clean = generate(problem, config.seed, Split::Train);
    const Dataset test = generate(problem, config.seed, Split::Test);
    for (std::size_t run = 0; run < config.runs; ++run) {
      const std::uint64_t run_seed = derive_seed(config.seed, {run});
      const Dataset train = add_noise(clean, noise_level, derive_seed(run_seed, {200}));
      const std::string prefix = "[" + problem.name + " run " + std::to_string(run + 1) + "] ";
      const SearchResult res = run_search(train, seeded(config, run_seed), log ? epoch_logger(log, prefix) : EpochCallback{});
      const double r2 = res.best.failed ? std::numeric_limits<double>::quiet_NaN() : test_r2(res.best.refined, test);
      pr.r2.push_back(r2);
      pr.expressions.push_back(res.best.failed ? std::string() : to_string(res.best.refined, {config.digits}));
      pr.seconds.push_back(res.seconds);
      if (log) *log << prefix << "test R^2 " << num(r2, 8) << "  " << pr.expressions.back() << "\n";
    }
    results.push_back(std::move(pr));
  }
  return results;
}

double suite_solution_rate(const std::vector<ProblemResult>& results) {
  std::vector<double> best;
  for (const auto& r : results) best.push_back(r.best_r2());
  return solution_rate(best, 0.99);
}

nlohmann::json cmd_benchmark(const std::string& suite, const RunConfig& config, const BenchmarkPaths& paths,
                             std::ostream& out, std::ostream* log) {
  const auto problems = select_suite(suite);
  const auto results = run_benchmark(problems, config, 0.0, log);

  std::string csv = "problem,family,runs,mean_r2,stderr_r2,best_r2,mean_seconds,best_expression\n";
  nlohmann::json rows = nlohmann::json::array();
  std::vector<std::string> family_order;
  std::map<std::string, std::vector<double>> family_means;
  out << std::left << std::setw(14) << "problem" << std::setw(12) << "mean R^2" << std::setw(12) << "stderr"
      << std::setw(12) << "best R^2" << "expression\n";
  for (const auto& r : results) {
    const double mean_s = std::accumulate(r.seconds.begin(), r.seconds.end(), 0.0) / static_cast<double>(r.seconds.size());
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < r.r2.size(); ++i)
      if (std::isfinite(r.r2[i]) && (!std::isfinite(r.r2[best_idx]) || r.r2[i] > r.r2[best_idx])) best_idx = i;
    const std::string& best_expr = r.expressions[best_idx];
    csv += r.name + "," + r.family + "," + std::to_string(r.r2.size()) + "," + num(r.mean_r2(), 10) + "," +
           num(r.stderr_r2(), 10) + "," + num(r.best_r2(), 10) + "," + num(mean_s, 6) + "," + quote_csv(best_expr) +
           "\n";
    nlohmann::json r2 = nlohmann::json::array();
    for (double v : r.r2) r2.push_back(finite_or_null(v));
    rows.push_back({{"problem", r.name},
                    {"family", r.family},
                    {"r2", r2},
                    {"expressions", r.expressions},
                    {"mean_r2", finite_or_null(r.mean_r2())},
                    {"stderr_r2", finite_or_null(r.stderr_r2())},
                    {"best_r2", finite_or_null(r.best_r2())}});
    if (!family_means.count(r.family)) family_order.push_back(r.family);
    family_means[r.family].push_back(r.mean_r2());
    out << std::left << std::setw(14) << r.name << std::setw(12) << num(r.mean_r2(), 6) << std::setw(12)
        << num(r.stderr_r2(), 3) << std::setw(12) << num(r.best_r2(), 6) << best_expr << "\n";
  }
  nlohmann::json families = nlohmann::json::array();
  for (const auto& f : family_order) {
    const auto& v = family_means[f];
    double s = 0.0;
    std::size_t n = 0;
    for (double m : v) {
      if (std::isfinite(m)) {
        s += m;
        ++n;
      }
    }
    const double mean = n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
    families.push_back({{"family", f}, {"problems", v.size()}, {"mean_r2", finite_or_null(mean)}});
    out << "family " << f << ": mean R^2 " << num(mean, 6) << " over " << v.size() << " problems\n";
  }
  const double rate = suite_solution_rate(results);
  out << "solution rate (best R^2 > 0.99): " << num(rate, 4) << "\n";
  write_text(paths.csv, csv);
  nlohmann::json doc = {{"suite", suite},
                        {"config", config.to_json()},
                        {"problems", rows},
                        {"families", families},
                        {"solution_rate", rate}};
  write_text(paths.json, doc.dump(2) + "\n");
  return doc;
}

std::vector<std::pair<double, double>> cmd_noise_sweep(const std::string& suite, const RunConfig& config,
                                                       const std::filesystem::path& csv, std::ostream& out,
                                                       std::ostream* log) {
  config.validate();
  const auto problems = select_suite(suite);
  std::vector<std::pair<double, double>> rows;
  std::string text = "level,solution_rate\n";
  for (double level : config.noise_levels) {
    const auto results = run_benchmark(problems, config, level, log);
    const double rate = suite_solution_rate(results);
    rows.emplace_back(level, rate);
    text += num(level, 10) + "," + num(rate, 10) + "\n";
    out << "noise " << num(level, 4) << ": solution rate " << num(rate, 4) << "\n";
  }
  write_text(csv, text);
  return rows;
}

void cmd_predict(const std::string& expression, const std::filesystem::path& csv, std::ostream& out) {
  const Expression e = parse(expression);
  const Dataset data = read_csv(csv, false);
  if (variable_count(e) > data.dims()) {
    throw std::invalid_argument("expression uses x" + std::to_string(variable_count(e)) + " but '" + csv.string() +
                                "' has " + std::to_string(data.dims()) + " input columns");
  }
  const std::vector<double> pred = evaluate(e, data.x, false);
  const bool has_y = !data.y.empty();
  for (std::size_t j = 0; j < data.dims(); ++j) out << "x" << j + 1 << ",";
  out << (has_y ? "y," : "") << "y_hat,valid\n";
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < data.dims(); ++j) out << num(data.x(i, j), 17) << ",";
    if (has_y) out << num(data.y[i], 17) << ",";
    const bool valid = std::isfinite(pred[i]);
    out << (valid ? num(pred[i], 17) : std::string("nan")) << "," << (valid ? 1 : 0) << "\n";
  }
}

void cmd_list_suites(std::ostream& out) {
  for (const auto& suite : suite_names()) {
    const auto problems = select_suite(suite);
    out << suite << " (" << problems.size() << "):";
    for (const auto& p : problems) out << " " << p.name;
    out << "\n";
  }
}

}  // namespace netsr::cli
