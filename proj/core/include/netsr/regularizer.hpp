#pragma once

namespace netsr {

/// Smoothed L0.5 penalty: |w|^(1/2) for |w| >= a, and the quartic blend
/// sqrt(-w^4/(8a^3) + 3w^2/(4a) + 3a/8) inside (-a, a). Value and slope are
/// continuous at |w| = a. Throws std::invalid_argument if a <= 0.
double l05_star(double w, double a);

/// d/dw of l05_star. Zero at w = 0.
double l05_star_derivative(double w, double a);

}  // namespace netsr
