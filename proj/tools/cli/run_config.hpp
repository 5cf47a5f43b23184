#pragma once

// Run configuration shared by every subcommand. Values come from built-in
// defaults, then an optional key=value file, then command-line flags.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netsr/search.hpp"

namespace netsr::cli {

struct RunConfig {
  SearchConfig search;
  std::uint64_t seed = 0;
  std::size_t runs = 3;
  double test_fraction = 0.2;
  int digits = 6;
  std::vector<double> noise_levels{0.0, 1e-3, 1e-2, 1e-1};

  /// Sets one dotted key. Throws std::invalid_argument on an unknown key or
  /// a malformed or out-of-range value.
  void set(const std::string& key, const std::string& value);
  /// Reduced budget: n1 = n2 = 2000, M = 20, N = 5.
  void apply_quick();
  void validate() const;
  nlohmann::json to_json() const;

  static std::vector<std::string> keys();
};

/// Reads `key = value` lines; '#' starts a comment. Errors name the line.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Parses "key=value".
void apply_assignment(RunConfig& config, const std::string& assignment);

}  // namespace netsr::cli
