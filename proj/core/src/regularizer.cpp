#include "netsr/regularizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace netsr {

namespace {

void check_transition(double a) {
  if (!(a > 0.0)) {
    throw std::invalid_argument("l05_star: transition point must be positive, got " + std::to_string(a));
  }
}

double smooth_inner(double w, double a) {
  const double w2 = w * w;
  return -w2 * w2 / (8.0 * a * a * a) + 3.0 * w2 / (4.0 * a) + 3.0 * a / 8.0;
}

}  // namespace

double l05_star(double w, double a) {
  check_transition(a);
  const double m = std::abs(w);
  if (m >= a) return std::sqrt(m);
  return std::sqrt(smooth_inner(w, a));
}

double l05_star_derivative(double w, double a) {
  check_transition(a);
  const double m = std::abs(w);
  if (m >= a) return (w > 0.0 ? 1.0 : -1.0) / (2.0 * std::sqrt(m));
  const double inner_slope = -w * w * w / (2.0 * a * a * a) + 3.0 * w / (2.0 * a);
  return inner_slope / (2.0 * std::sqrt(smooth_inner(w, a)));
}

}  // namespace netsr
