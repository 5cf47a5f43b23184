#include "netsr/bench.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "netsr/rng.hpp"

namespace netsr {

namespace detail {
extern const std::string_view kCorpusManifest;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

bool parse_size(std::string_view s, std::size_t& out) {
  s = trim(s);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return !s.empty() && r.ec == std::errc() && r.ptr == s.data() + s.size();
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  auto lines = split(text, '\n');
  for (auto& l : lines)
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
  return lines;
}

const std::vector<std::string_view> kEasy = {"Nguyen-1", "Nguyen-2", "Nguyen-3", "Nguyen-4",  "Nguyen-5",
                                             "Nguyen-6", "Koza-2",   "Koza-3",   "Constant-1"};

}  // namespace

std::string family_of(std::string_view name) {
  const std::size_t dash = name.rfind('-');
  if (dash == std::string_view::npos) return std::string(name);
  std::string family(name.substr(0, dash));
  const std::string_view tail = name.substr(dash + 1);
  if (!tail.empty() && std::isalpha(static_cast<unsigned char>(tail.back())) &&
      std::isdigit(static_cast<unsigned char>(tail.front()))) {
    family += '-';
    family += tail.back();
  }
  return family;
}

std::vector<BenchmarkProblem> parse_manifest(std::string_view text) {
  std::vector<BenchmarkProblem> out;
  const auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (trim(line).empty() || trim(line).front() == '#') continue;
    auto fail = [&](const std::string& why) {
      return std::invalid_argument("manifest line " + std::to_string(i + 1) + ": " + why);
    };
    const auto f = split(line, '\t');
    if (f.size() != 6) throw fail("expected 6 tab-separated fields, got " + std::to_string(f.size()));
    BenchmarkProblem p;
    p.name = std::string(trim(f[0]));
    p.family = family_of(p.name);
    p.source = std::string(trim(f[1]));
    try {
      p.expression = parse(p.source);
    } catch (const ParseError& e) {
      throw fail(e.what());
    }
    if (!parse_size(f[2], p.dims) || p.dims == 0) throw fail("bad dimension");
    if (!parse_double(f[3], p.low) || !parse_double(f[4], p.high) || !(p.low < p.high)) throw fail("bad range");
    if (!parse_size(f[5], p.count) || p.count == 0) throw fail("bad point count");
    if (variable_count(p.expression) > p.dims) throw fail("expression uses more variables than declared");
    out.push_back(std::move(p));
  }
  return out;
}

const std::vector<BenchmarkProblem>& corpus() {
  static const std::vector<BenchmarkProblem> problems = parse_manifest(detail::kCorpusManifest);
  return problems;
}

const BenchmarkProblem& find_problem(std::string_view name) {
  const std::string key = lower(name);
  for (const auto& p : corpus())
    if (lower(p.name) == key) return p;
  throw std::invalid_argument("unknown benchmark problem '" + std::string(name) + "'");
}

std::vector<std::string> suite_names() {
  std::vector<std::string> out;
  for (const auto& p : corpus()) {
    const std::string f = lower(p.family);
    if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
  }
  out.push_back("easy");
  out.push_back("all");
  return out;
}

std::vector<BenchmarkProblem> select_suite(std::string_view suite) {
  std::set<std::string> chosen;
  for (std::string_view part : split(suite, ',')) {
    const std::string key = lower(trim(part));
    if (key.empty()) continue;
    bool matched = false;
    for (const auto& p : corpus()) {
      const bool hit = key == "all" || lower(p.family) == key || lower(p.name) == key ||
                       (key == "easy" && std::find(kEasy.begin(), kEasy.end(), p.name) != kEasy.end());
      if (hit) {
        chosen.insert(p.name);
        matched = true;
      }
    }
    if (!matched) {
      std::string list;
      for (const auto& s : suite_names()) list += (list.empty() ? "" : ", ") + s;
      throw std::invalid_argument("suite '" + key + "' selects no problems; available suites: " + list +
                                  " (or problem names)");
    }
  }
  if (chosen.empty()) throw std::invalid_argument("empty suite selection");
  std::vector<BenchmarkProblem> out;
  for (const auto& p : corpus())
    if (chosen.count(p.name)) out.push_back(p);
  return out;
}

Dataset generate(const BenchmarkProblem& problem, std::uint64_t seed, Split split,
                 std::optional<std::size_t> count) {
  const std::size_t n = count.value_or(problem.count);
  Dataset d;
  d.x = Matrix(n, problem.dims);
  d.y.resize(n);
  d.split = split;
  d.seed = derive_seed(seed, {fnv1a(problem.name), static_cast<std::uint64_t>(split) + 1});
  Rng rng(d.seed);
  std::vector<double> point(problem.dims);
  for (std::size_t i = 0; i < n; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      for (double& v : point) v = rng.uniform(problem.low, problem.high);
      const double y = evaluate_point(problem.expression, point, false);
      if (std::isfinite(y)) {
        for (std::size_t j = 0; j < problem.dims; ++j) d.x(i, j) = point[j];
        d.y[i] = y;
        ok = true;
      }
    }
    if (!ok) throw std::runtime_error(problem.name + ": no finite target after 100 draws");
  }
  return d;
}

Dataset add_noise(const Dataset& data, double level, std::uint64_t seed) {
  if (!(level >= 0.0)) throw std::invalid_argument("noise level must be non-negative");
  if (data.split == Split::Test) throw std::invalid_argument("noise is only applied to training data");
  Dataset out = data;
  out.noise_level = level;
  if (level == 0.0 || data.y.empty()) return out;
  double sq = 0.0;
  for (double v : data.y) sq += v * v;
  const double sigma = level * std::sqrt(sq / static_cast<double>(data.y.size()));
  Rng rng(seed);
  for (double& v : out.y) v += rng.normal(0.0, sigma);
  return out;
}

Dataset parse_csv(std::string_view text, bool require_target) {
  const auto lines = lines_of(text);
  std::size_t first = 0;
  while (first < lines.size() && trim(lines[first]).empty()) ++first;
  if (first == lines.size()) throw std::invalid_argument("csv: empty input");
  const auto header = split(lines[first], ',');
  const bool has_target = trim(header.back()) == "y";
  if ((require_target && !has_target) || (has_target && header.size() < 2)) {
    throw std::invalid_argument("csv line " + std::to_string(first + 1) + ": header must be x1,...,xd,y");
  }
  const std::size_t d = has_target ? header.size() - 1 : header.size();
  for (std::size_t j = 0; j < d; ++j) {
    if (trim(header[j]) != "x" + std::to_string(j + 1)) {
      throw std::invalid_argument("csv line " + std::to_string(first + 1) + ": column " + std::to_string(j + 1) +
                                  " must be named x" + std::to_string(j + 1));
    }
  }
  const std::size_t width = header.size();
  std::vector<double> xs, ys;
  std::size_t rows = 0;
  for (std::size_t i = first + 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto f = split(lines[i], ',');
    if (f.size() != width) {
      throw std::invalid_argument("csv line " + std::to_string(i + 1) + ": expected " + std::to_string(width) +
                                  " fields, got " + std::to_string(f.size()));
    }
    for (std::size_t j = 0; j < width; ++j) {
      double v = 0.0;
      if (!parse_double(f[j], v)) {
        throw std::invalid_argument("csv line " + std::to_string(i + 1) + ": field " + std::to_string(j + 1) +
                                    " is not a number");
      }
      (j < d ? xs : ys).push_back(v);
    }
    ++rows;
  }
  Dataset data;
  data.x = Matrix(rows, d);
  data.x.data = std::move(xs);
  data.y = std::move(ys);
  return data;
}

Dataset read_csv(const std::filesystem::path& path, bool require_target) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_csv(buf.str(), require_target);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string format_csv(const Dataset& data) {
  std::string out;
  for (std::size_t j = 0; j < data.dims(); ++j) out += "x" + std::to_string(j + 1) + ",";
  out += "y\n";
  char buf[40];
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < data.dims(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,", data.x(i, j));
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g\n", data.y[i]);
    out += buf;
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << format_csv(data);
}

}  // namespace netsr
