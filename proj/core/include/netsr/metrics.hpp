#pragma once

#include <span>

namespace netsr {

double mean_squared_error(std::span<const double> y, std::span<const double> y_hat);

/// 1 - SS_res / SS_tot. Throws std::invalid_argument on mismatched lengths,
/// fewer than two points, or zero variance in `y`.
double r_squared(std::span<const double> y, std::span<const double> y_hat);

/// Fraction of entries strictly above `threshold`. Throws on an empty list.
double solution_rate(std::span<const double> r2, double threshold = 0.99);

}  // namespace netsr
