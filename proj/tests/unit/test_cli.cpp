#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <rapidjson/document.h>
#include <rapidjson/schema.h>
#include <rapidjson/stringbuffer.h>

#include "commands.hpp"
#include "run_config.hpp"

using namespace netsr;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Scratch directory removed at scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("netsr_test_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write_identity_csv(const fs::path& dir, std::size_t rows) {
  Dataset d;
  Rng rng(91);
  d.x = Matrix(rows, 1);
  for (double& v : d.x.data) v = rng.uniform(-1, 1);
  d.y = d.x.data;
  const fs::path p = dir / "identity.csv";
  write_csv(p, d);
  return p;
}

std::string schema_errors(const std::string& document) {
  rapidjson::Document schema_doc;
  schema_doc.Parse(slurp(NETSR_SCHEMA_PATH).c_str());
  REQUIRE_FALSE(schema_doc.HasParseError());
  rapidjson::SchemaDocument schema(schema_doc);
  rapidjson::Document doc;
  doc.Parse(document.c_str());
  REQUIRE_FALSE(doc.HasParseError());
  rapidjson::SchemaValidator validator(schema);
  if (doc.Accept(validator)) return {};
  rapidjson::StringBuffer where;
  validator.GetInvalidDocumentPointer().StringifyUriFragment(where);
  return std::string(validator.GetInvalidSchemaKeyword()) + " at " + where.GetString();
}

cli::RunConfig tiny_config() {
  cli::RunConfig c;
  c.set("search.epochs", "2");
  c.set("search.batch", "3");
  c.set("train.stage1_epochs", "100");
  c.set("train.stage2_epochs", "100");
  return c;
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(NETSR_BINARY) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json without_timings(nlohmann::json report) {
  report.erase("timings");
  return report;
}

}  // namespace

TEST_CASE("run configuration keys") {
  cli::RunConfig c;
  c.set("controller.lr", "0.01");
  CHECK(c.search.controller_lr == 0.01);
  c.set("search.stop_r2", "0.999");
  REQUIRE(c.search.stop_r2.has_value());
  c.set("search.stop_r2", "none");
  CHECK_FALSE(c.search.stop_r2.has_value());
  c.set("library.operators", "sin,cos,add");
  CHECK(c.search.controller.operators == std::vector<Op>{Op::Sin, Op::Cos, Op::Add});
  c.set("controller.optimizer", "sgd");
  CHECK(c.search.optimizer == PolicyOptimizer::Sgd);
  CHECK_THROWS_AS(c.set("search.unknown", "1"), std::invalid_argument);
  CHECK_THROWS_AS(c.set("search.batch", "many"), std::invalid_argument);
  cli::RunConfig risky;
  risky.set("search.risk", "1.5");
  CHECK_THROWS_AS(risky.validate(), std::invalid_argument);
  CHECK_THROWS_AS(cli::apply_assignment(c, "search.batch"), std::invalid_argument);
  for (const auto& k : cli::RunConfig::keys()) CHECK(c.to_json().contains(k));
}

TEST_CASE("defaults match the documented hyperparameters") {
  const cli::RunConfig c;
  CHECK(c.search.controller_lr == 0.0006);
  CHECK(c.search.entropy_weight == 0.005);
  CHECK(c.search.controller.hidden == 32);
  CHECK(c.search.risk == 0.5);
  CHECK(c.search.train.learning_rate == 0.1);
  CHECK(c.search.train.reg_weight == 0.005);
  CHECK(c.search.train.prune_threshold == 0.01);
  CHECK(c.search.train.stage1_epochs == 10000);
  CHECK(c.search.train.stage2_epochs == 10000);
  CHECK(c.search.train.adaptive_clip);
  CHECK(c.search.train.clip_window == 50);
  CHECK_FALSE(c.search.bias);
  CHECK(c.runs == 3);
  CHECK(c.noise_levels == std::vector<double>{0.0, 1e-3, 1e-2, 1e-1});
  cli::RunConfig q;
  q.apply_quick();
  CHECK(q.search.train.stage1_epochs == 2000);
  CHECK(q.search.train.stage2_epochs == 2000);
  CHECK(q.search.epochs == 20);
  CHECK(q.search.batch == 5);
}

TEST_CASE("configuration file then assignments") {
  TempDir dir("config");
  const fs::path file = dir.path / "run.cfg";
  std::ofstream(file) << "# budget\nsearch.epochs = 7\nsearch.batch = 4  # inline\n\ntrain.lr=0.05\n";
  cli::RunConfig c;
  cli::apply_config_file(c, file);
  CHECK(c.search.epochs == 7);
  CHECK(c.search.batch == 4);
  CHECK(c.search.train.learning_rate == 0.05);
  cli::apply_assignment(c, "search.epochs=9");
  CHECK(c.search.epochs == 9);

  std::ofstream(file) << "search.epochs = 7\nbogus.key = 1\n";
  try {
    cli::apply_config_file(c, file);
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("fit report validates against the schema") {
  TempDir dir("fit");
  const fs::path csv = write_identity_csv(dir.path, 60);
  cli::FitPaths paths{dir.path / "report.json", dir.path / "history.json"};
  std::ostringstream out;
  const nlohmann::json report = cli::cmd_fit(csv, tiny_config(), paths, out);
  CHECK(schema_errors(slurp(paths.report)) == "");
  CHECK(fs::exists(paths.history));
  CHECK(report["test_r2"].get<double>() > 0.999);
  CHECK(out.str().find("test R^2") != std::string::npos);

  nlohmann::json broken = report;
  broken.erase("seed");
  CHECK(schema_errors(broken.dump()) != "");
  broken = report;
  broken["complexity"] = "ten";
  CHECK(schema_errors(broken.dump()) != "");
}

TEST_CASE("fit input errors") {
  TempDir dir("fit_errors");
  std::ostringstream out;
  cli::FitPaths paths{dir.path / "r.json", dir.path / "h.json"};
  CHECK_THROWS(cli::cmd_fit(dir.path / "missing.csv", tiny_config(), paths, out));
  std::ofstream(dir.path / "short.csv") << "x1,y\n1,1\n2,2\n";
  CHECK_THROWS(cli::cmd_fit(dir.path / "short.csv", tiny_config(), paths, out));
  {
    std::ofstream flat(dir.path / "flat.csv");
    flat << "x1,y\n";
    for (int i = 0; i < 20; ++i) flat << i << ",3\n";
  }
  CHECK_THROWS(cli::cmd_fit(dir.path / "flat.csv", tiny_config(), paths, out));
}

TEST_CASE("fit is deterministic for a seed") {
  TempDir dir("determinism");
  const fs::path csv = write_identity_csv(dir.path, 60);
  cli::RunConfig c = tiny_config();
  c.seed = 7;
  c.search.reward_threshold = 1.0;
  std::ostringstream out;
  const auto a = cli::cmd_fit(csv, c, {dir.path / "a.json", dir.path / "ah.json"}, out);
  const auto b = cli::cmd_fit(csv, c, {dir.path / "b.json", dir.path / "bh.json"}, out);
  auto strip = [](nlohmann::json j) {
    j = without_timings(std::move(j));
    j.erase("history_path");
    return j;
  };
  CHECK(strip(a).dump() == strip(b).dump());
}

TEST_CASE("predict writes estimates and validity") {
  TempDir dir("predict");
  std::ofstream(dir.path / "in.csv") << "x1,y\n0.5,1\n-1,2\n4,3\n";
  std::ostringstream out;
  cli::cmd_predict("log(x1)", dir.path / "in.csv", out);
  const std::string text = out.str();
  CHECK(text.rfind("x1,y,y_hat,valid\n", 0) == 0);
  CHECK(text.find("-1,2,nan,0") != std::string::npos);

  std::ostringstream copy;
  cli::cmd_predict("x1", dir.path / "in.csv", copy);
  CHECK(copy.str().find("0.5,1,0.5,1") != std::string::npos);

  const BenchmarkProblem& n5 = find_problem("Nguyen-5");
  const Dataset d = generate(n5, 1, Split::Test, 20);
  write_csv(dir.path / "n5.csv", d);
  std::ostringstream n5_out;
  cli::cmd_predict(n5.source, dir.path / "n5.csv", n5_out);
  std::istringstream lines(n5_out.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "x1,y,y_hat,valid");
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    REQUIRE(cells.size() == 4);
    CHECK(cells[1] == cells[2]);
    CHECK(cells[3] == "1");
    ++rows;
  }
  CHECK(rows == d.rows());

  CHECK_THROWS(cli::cmd_predict("x2", dir.path / "in.csv", out));
  CHECK_THROWS(cli::cmd_predict("sin(", dir.path / "in.csv", out));
}

TEST_CASE("benchmark and noise sweep plumbing") {
  TempDir dir("bench");
  cli::RunConfig c = tiny_config();
  c.runs = 2;
  c.search.epochs = 1;
  std::ostringstream out;
  const auto doc = cli::cmd_benchmark("Koza-2,Nguyen-1", c, {dir.path / "b.csv", dir.path / "b.json"}, out);
  const std::string csv = slurp(dir.path / "b.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.rfind("problem,family,runs,mean_r2,stderr_r2,best_r2,mean_seconds,best_expression", 0) == 0);
  CHECK(fs::exists(dir.path / "b.json"));
  CHECK(doc.is_object());
  CHECK_THROWS_AS(cli::cmd_benchmark("none-such", c, {dir.path / "x.csv", dir.path / "x.json"}, out),
                  std::invalid_argument);

  c.noise_levels = {0.0, 0.1};
  const auto rates = cli::cmd_noise_sweep("Koza-2", c, dir.path / "n.csv", out);
  REQUIRE(rates.size() == 2);
  const std::string sweep = slurp(dir.path / "n.csv");
  CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 3);

  c.noise_levels = {0.0};
  c.runs = 1;
  const auto single = cli::cmd_noise_sweep("Koza-2", c, dir.path / "n0.csv", out);
  const auto plain = cli::run_benchmark(select_suite("Koza-2"), c, 0.0);
  CHECK(single[0].second == cli::suite_solution_rate(plain));
}

TEST_CASE("problem result statistics") {
  cli::ProblemResult r;
  r.r2 = {0.9, 0.95, std::nan("")};
  CHECK(r.mean_r2() == doctest::Approx(0.925));
  CHECK(r.best_r2() == 0.95);
  CHECK(r.stderr_r2() == doctest::Approx(0.025));
  std::vector<cli::ProblemResult> results(2);
  results[0].r2 = {0.995};
  results[1].r2 = {0.5, 0.991};
  CHECK(cli::suite_solution_rate(results) == 1.0);
}

TEST_CASE("binary exit codes and flag precedence") {
  TempDir dir("binary");
  const fs::path csv = write_identity_csv(dir.path, 40);
  CHECK(run_binary("fit " + (dir.path / "missing.csv").string()) != 0);
  CHECK(run_binary("list-suites") == 0);
  CHECK(run_binary("benchmark --suite none-such") != 0);

  const fs::path cfg = dir.path / "run.cfg";
  std::ofstream(cfg) << "search.epochs = 5\nsearch.batch = 3\ntrain.stage1_epochs = 50\ntrain.stage2_epochs = 50\n"
                        "search.reward_threshold = 1\n";
  const fs::path report = dir.path / "r.json";
  const std::string base = "fit " + csv.string() + " --config " + cfg.string() + " --report " + report.string() +
                           " --history " + (dir.path / "h.json").string();
  REQUIRE(run_binary(base + " --set search.epochs=3 --epochs 2 --seed 4") == 0);
  const auto doc = nlohmann::json::parse(slurp(report));
  CHECK(doc["config"]["search.epochs"] == 2);
  CHECK(doc["config"]["search.batch"] == 3);
  CHECK(doc["config"]["train.stage1_epochs"] == 50);
  CHECK(doc["seed"] == 4);
  CHECK(doc["epochs_run"] == 2);

  REQUIRE(run_binary(base + " --quick --set search.epochs=3") == 0);
  const auto quick = nlohmann::json::parse(slurp(report));
  CHECK(quick["config"]["search.epochs"] == 3);
  CHECK(quick["config"]["search.batch"] == 5);
  CHECK(quick["config"]["train.stage1_epochs"] == 2000);
}
