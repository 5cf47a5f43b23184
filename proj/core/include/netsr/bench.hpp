#pragma once

// Benchmark corpus, dataset generation, noise injection and CSV I/O.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "netsr/dataset.hpp"
#include "netsr/expr.hpp"
#include "netsr/metrics.hpp"

namespace netsr {

struct BenchmarkProblem {
  std::string name;
  /// Name prefix, e.g. "Nguyen"; variants with a letter suffix ("Nguyen-1c")
  /// form their own family ("Nguyen-c").
  std::string family;
  std::string source;
  Expression expression;
  std::size_t dims = 1;
  double low = 0.0;
  double high = 1.0;
  std::size_t count = 0;
};

/// Parses a tab-separated manifest (name, expression, d, low, high, count).
/// Blank lines and lines starting with '#' are skipped. Errors name the line.
std::vector<BenchmarkProblem> parse_manifest(std::string_view text);

/// The built-in corpus.
const std::vector<BenchmarkProblem>& corpus();
const BenchmarkProblem& find_problem(std::string_view name);

/// Families plus "easy" and "all".
std::vector<std::string> suite_names();
/// Case-insensitive family name, "easy", "all", a problem name, or a
/// comma-separated list of those. Throws std::invalid_argument listing the
/// available suites when nothing matches.
std::vector<BenchmarkProblem> select_suite(std::string_view suite);

std::string family_of(std::string_view name);

/// Inputs drawn uniformly from [low, high) per variable; targets from
/// unguarded evaluation. Train, test and full splits use distinct sub-seeds.
Dataset generate(const BenchmarkProblem& problem, std::uint64_t seed, Split split,
                 std::optional<std::size_t> count = std::nullopt);

/// y + N(0, (level * rms(y))^2). Only training data may be noised.
Dataset add_noise(const Dataset& data, double level, std::uint64_t seed);

/// Header x1..xd,y. With `require_target` unset the y column may be absent,
/// leaving `y` empty. Errors name the offending line.
Dataset read_csv(const std::filesystem::path& path, bool require_target = true);
Dataset parse_csv(std::string_view text, bool require_target = true);
void write_csv(const std::filesystem::path& path, const Dataset& data);
std::string format_csv(const Dataset& data);

}  // namespace netsr
