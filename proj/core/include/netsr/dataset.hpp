#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "netsr/matrix.hpp"

namespace netsr {

enum class Split : std::uint8_t { Train, Test, Full };

std::string_view split_name(Split s);

/// Paired inputs (one row per point, one column per variable) and targets.
struct Dataset {
  Matrix x;
  std::vector<double> y;
  Split split = Split::Full;
  double noise_level = 0.0;
  std::uint64_t seed = 0;

  std::size_t rows() const { return x.rows; }
  std::size_t dims() const { return x.cols; }
  bool empty() const { return y.empty(); }

  /// Throws std::invalid_argument when |y| != rows of x or the set is empty.
  void validate() const;

  /// Rows selected by `indices`, in that order.
  Dataset subset(const std::vector<std::size_t>& indices, Split tag) const;
};

}  // namespace netsr
