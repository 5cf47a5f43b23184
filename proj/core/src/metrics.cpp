#include "netsr/metrics.hpp"

#include <stdexcept>
#include <string>

namespace netsr {

namespace {

void check_lengths(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) {
    throw std::invalid_argument("metric: " + std::to_string(y.size()) + " targets but " +
                                std::to_string(y_hat.size()) + " predictions");
  }
}

}  // namespace

double mean_squared_error(std::span<const double> y, std::span<const double> y_hat) {
  check_lengths(y, y_hat);
  if (y.empty()) throw std::invalid_argument("mean_squared_error: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - y_hat[i];
    s += r * r;
  }
  return s / static_cast<double>(y.size());
}

double r_squared(std::span<const double> y, std::span<const double> y_hat) {
  check_lengths(y, y_hat);
  if (y.size() < 2) throw std::invalid_argument("r_squared: need at least two points");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  if (ss_tot == 0.0) throw std::invalid_argument("r_squared: targets have zero variance");
  return 1.0 - ss_res / ss_tot;
}

double solution_rate(std::span<const double> r2, double threshold) {
  if (r2.empty()) throw std::invalid_argument("solution_rate: empty list");
  std::size_t hits = 0;
  for (double v : r2)
    if (v > threshold) ++hits;
  return static_cast<double>(hits) / static_cast<double>(r2.size());
}

}  // namespace netsr
