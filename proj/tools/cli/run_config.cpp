#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace netsr::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw std::invalid_argument(key + ": '" + v + "' is not a number");
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw std::invalid_argument(key + ": '" + v + "' is not a non-negative integer");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  std::string l = v;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
  if (l == "false" || l == "0" || l == "no" || l == "off") return false;
  throw std::invalid_argument(key + ": '" + v + "' is not a boolean");
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(v)) out.push_back(to_uint(key, item));
  if (out.empty()) throw std::invalid_argument(key + ": empty list");
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (auto x : v) out += (out.empty() ? "" : ",") + std::to_string(x);
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
  std::function<nlohmann::json(const RunConfig&)> get;
};

const std::map<std::string, Field>& fields() {
  using J = nlohmann::json;
  static const std::map<std::string, Field> table = {
      {"controller.lr", {[](RunConfig& c, auto& k, auto& v) { c.search.controller_lr = to_double(k, v); },
                         [](const RunConfig& c) { return J(c.search.controller_lr); }}},
      {"controller.entropy_weight",
       {[](RunConfig& c, auto& k, auto& v) { c.search.entropy_weight = to_double(k, v); },
        [](const RunConfig& c) { return J(c.search.entropy_weight); }}},
      {"controller.hidden", {[](RunConfig& c, auto& k, auto& v) { c.search.controller.hidden = to_uint(k, v); },
                             [](const RunConfig& c) { return J(c.search.controller.hidden); }}},
      {"controller.optimizer",
       {[](RunConfig& c, auto& k, auto& v) {
          const auto o = optimizer_from_name(v);
          if (!o) throw std::invalid_argument(k + ": expected 'adam' or 'sgd'");
          c.search.optimizer = *o;
        },
        [](const RunConfig& c) { return J(std::string(optimizer_name(c.search.optimizer))); }}},
      {"search.risk", {[](RunConfig& c, auto& k, auto& v) { c.search.risk = to_double(k, v); },
                       [](const RunConfig& c) { return J(c.search.risk); }}},
      {"search.batch", {[](RunConfig& c, auto& k, auto& v) { c.search.batch = to_uint(k, v); },
                        [](const RunConfig& c) { return J(c.search.batch); }}},
      {"search.epochs", {[](RunConfig& c, auto& k, auto& v) { c.search.epochs = to_uint(k, v); },
                         [](const RunConfig& c) { return J(c.search.epochs); }}},
      {"search.reward_threshold",
       {[](RunConfig& c, auto& k, auto& v) { c.search.reward_threshold = to_double(k, v); },
        [](const RunConfig& c) { return J(c.search.reward_threshold); }}},
      {"search.stop_r2",
       {[](RunConfig& c, auto& k, auto& v) {
          if (v == "none" || v.empty()) {
            c.search.stop_r2.reset();
          } else {
            c.search.stop_r2 = to_double(k, v);
          }
        },
        [](const RunConfig& c) { return c.search.stop_r2 ? J(*c.search.stop_r2) : J(nullptr); }}},
      {"search.workers", {[](RunConfig& c, auto& k, auto& v) { c.search.workers = to_uint(k, v); },
                          [](const RunConfig& c) { return J(c.search.workers); }}},
      {"train.lr", {[](RunConfig& c, auto& k, auto& v) { c.search.train.learning_rate = to_double(k, v); },
                    [](const RunConfig& c) { return J(c.search.train.learning_rate); }}},
      {"train.reg_weight", {[](RunConfig& c, auto& k, auto& v) { c.search.train.reg_weight = to_double(k, v); },
                            [](const RunConfig& c) { return J(c.search.train.reg_weight); }}},
      {"train.stage1_epochs",
       {[](RunConfig& c, auto& k, auto& v) { c.search.train.stage1_epochs = to_uint(k, v); },
        [](const RunConfig& c) { return J(c.search.train.stage1_epochs); }}},
      {"train.stage2_epochs",
       {[](RunConfig& c, auto& k, auto& v) { c.search.train.stage2_epochs = to_uint(k, v); },
        [](const RunConfig& c) { return J(c.search.train.stage2_epochs); }}},
      {"train.adaptive_clip",
       {[](RunConfig& c, auto& k, auto& v) { c.search.train.adaptive_clip = to_bool(k, v); },
        [](const RunConfig& c) { return J(c.search.train.adaptive_clip); }}},
      {"train.clip_window", {[](RunConfig& c, auto& k, auto& v) { c.search.train.clip_window = to_uint(k, v); },
                             [](const RunConfig& c) { return J(c.search.train.clip_window); }}},
      {"train.clip_factor", {[](RunConfig& c, auto& k, auto& v) { c.search.train.clip_factor = to_double(k, v); },
                             [](const RunConfig& c) { return J(c.search.train.clip_factor); }}},
      {"train.prune_threshold",
       {[](RunConfig& c, auto& k, auto& v) { c.search.train.prune_threshold = to_double(k, v); },
        [](const RunConfig& c) { return J(c.search.train.prune_threshold); }}},
      {"train.transition", {[](RunConfig& c, auto& k, auto& v) { c.search.train.transition = to_double(k, v); },
                            [](const RunConfig& c) { return J(c.search.train.transition); }}},
      {"train.bias", {[](RunConfig& c, auto& k, auto& v) { c.search.bias = to_bool(k, v); },
                      [](const RunConfig& c) { return J(c.search.bias); }}},
      {"library.operators",
       {[](RunConfig& c, auto& k, auto& v) {
          std::vector<Op> ops;
          for (const auto& name : split_list(v)) {
            const auto op = op_from_name(name);
            if (!op || *op == Op::Neg) throw std::invalid_argument(k + ": unknown operator '" + name + "'");
            ops.push_back(*op);
          }
          if (ops.empty()) throw std::invalid_argument(k + ": empty list");
          c.search.controller.operators = ops;
        },
        [](const RunConfig& c) {
          std::string out;
          for (Op op : c.search.controller.operators) out += (out.empty() ? "" : ",") + std::string(op_name(op));
          return J(out);
        }}},
      {"library.layers", {[](RunConfig& c, auto& k, auto& v) { c.search.controller.layer_counts = to_sizes(k, v); },
                          [](const RunConfig& c) { return J(join_sizes(c.search.controller.layer_counts)); }}},
      {"library.units", {[](RunConfig& c, auto& k, auto& v) { c.search.controller.unit_counts = to_sizes(k, v); },
                         [](const RunConfig& c) { return J(join_sizes(c.search.controller.unit_counts)); }}},
      {"refine.restarts", {[](RunConfig& c, auto& k, auto& v) { c.search.refine.restarts = to_uint(k, v); },
                           [](const RunConfig& c) { return J(c.search.refine.restarts); }}},
      {"refine.max_iterations",
       {[](RunConfig& c, auto& k, auto& v) { c.search.refine.max_iterations = to_uint(k, v); },
        [](const RunConfig& c) { return J(c.search.refine.max_iterations); }}},
      {"run.seed", {[](RunConfig& c, auto& k, auto& v) { c.seed = to_uint(k, v); },
                    [](const RunConfig& c) { return J(c.seed); }}},
      {"run.runs", {[](RunConfig& c, auto& k, auto& v) { c.runs = to_uint(k, v); },
                    [](const RunConfig& c) { return J(c.runs); }}},
      {"run.test_fraction", {[](RunConfig& c, auto& k, auto& v) { c.test_fraction = to_double(k, v); },
                             [](const RunConfig& c) { return J(c.test_fraction); }}},
      {"run.digits", {[](RunConfig& c, auto& k, auto& v) { c.digits = static_cast<int>(to_uint(k, v)); },
                      [](const RunConfig& c) { return J(c.digits); }}},
      {"noise.levels",
       {[](RunConfig& c, auto& k, auto& v) {
          std::vector<double> levels;
          for (const auto& item : split_list(v)) levels.push_back(to_double(k, item));
          if (levels.empty()) throw std::invalid_argument(k + ": empty list");
          c.noise_levels = levels;
        },
        [](const RunConfig& c) { return J(c.noise_levels); }}},
  };
  return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw std::invalid_argument("unknown configuration key '" + key + "'");
  it->second.set(*this, key, trim(value));
}

void RunConfig::apply_quick() {
  search.train.stage1_epochs = 2000;
  search.train.stage2_epochs = 2000;
  search.epochs = 20;
  search.batch = 5;
}

void RunConfig::validate() const {
  search.validate();
  if (runs == 0) throw std::invalid_argument("run.runs must be at least 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw std::invalid_argument("run.test_fraction must be in (0, 1)");
  if (digits < 1 || digits > 17) throw std::invalid_argument("run.digits must be in 1..17");
  for (double l : noise_levels)
    if (!(l >= 0.0 && l <= 1.0)) throw std::invalid_argument("noise levels must lie in [0, 1]");
  if (search.controller.limits().max_layers > 64 || search.controller.limits().max_units > 64) {
    throw std::invalid_argument("library sizes above 64 are not supported");
  }
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [key, field] : fields()) out[key] = field.get(*this);
  return out;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [key, field] : fields()) out.push_back(key);
  return out;
}

void apply_assignment(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("expected key=value, got '" + assignment + "'");
  config.set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path.string() + "'");
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    try {
      apply_assignment(config, line);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

}  // namespace netsr::cli
