#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "netsr/regularizer.hpp"
#include "netsr/rng.hpp"

using namespace netsr;

TEST_CASE("l05_star examples") {
  CHECK(l05_star(0.0, 0.05) == doctest::Approx(std::sqrt(3.0 * 0.05 / 8.0)));
  CHECK(l05_star(0.0, 0.05) == doctest::Approx(0.136931).epsilon(1e-6));
  CHECK(l05_star(0.05, 0.05) == doctest::Approx(std::sqrt(0.05)));
  for (double a : {0.01, 0.05, 0.5, 1.0}) CHECK(l05_star(1.0, a) == 1.0);
}

TEST_CASE("l05_star rejects a non-positive transition") {
  CHECK_THROWS_AS(l05_star(0.3, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(l05_star(0.3, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(l05_star_derivative(0.3, 0.0), std::invalid_argument);
}

TEST_CASE("l05_star is C1 at the transition") {
  for (double a : {0.05, 0.2, 1.0}) {
    CAPTURE(a);
    for (double s : {1.0, -1.0}) {
      const double lo = s * (a - 1e-8), hi = s * (a + 1e-8);
      CHECK(std::abs(l05_star(lo, a) - l05_star(hi, a)) < 1e-6);
      CHECK(std::abs(l05_star_derivative(lo, a) - l05_star_derivative(hi, a)) < 1e-6);
    }
    // Smooth branch slope at w = a equals 1/(2 sqrt(a)).
    CHECK(l05_star_derivative(a * (1 - 1e-12), a) == doctest::Approx(1.0 / (2.0 * std::sqrt(a))).epsilon(1e-6));
  }
}

TEST_CASE("l05_star symmetry and non-negativity") {
  Rng rng(21);
  for (int i = 0; i < 10000; ++i) {
    const double w = rng.uniform(-2, 2) * std::pow(10.0, rng.uniform(-4, 1));
    const double a = 0.05;
    REQUIRE(l05_star(w, a) >= 0.0);
    REQUIRE(l05_star(w, a) == l05_star(-w, a));
    REQUIRE(l05_star_derivative(w, a) == -l05_star_derivative(-w, a));
  }
  CHECK(l05_star_derivative(0.0, 0.05) == 0.0);
}

TEST_CASE("l05_star derivative matches central differences away from the transition") {
  Rng rng(22);
  const double a = 0.05;
  for (int i = 0; i < 1000; ++i) {
    const double w = rng.uniform(-1, 1);
    if (std::abs(std::abs(w) - a) < 1e-3) continue;
    const double h = 1e-7;
    const double fd = (l05_star(w + h, a) - l05_star(w - h, a)) / (2 * h);
    REQUIRE(l05_star_derivative(w, a) == doctest::Approx(fd).epsilon(1e-5));
  }
}
