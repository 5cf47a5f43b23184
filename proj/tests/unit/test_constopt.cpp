#include <doctest.h>

#include <cmath>
#include <limits>

#include "netsr/constopt.hpp"
#include "oracles.hpp"

using namespace netsr;

namespace {

Dataset make_data(const Matrix& x, const std::vector<double>& y) {
  Dataset d;
  d.x = x;
  d.y = y;
  return d;
}

// Solves A p = b for a small dense system by Gaussian elimination with
// partial pivoting.
std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
    std::swap(a[k], a[piv]);
    std::swap(b[k], b[piv]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a[i][k] / a[k][k];
      for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> p(n);
  for (std::size_t k = n; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= a[k][j] * p[j];
    p[k] = s / a[k][k];
  }
  return p;
}

// Least-squares coefficients of y on the given feature columns.
std::vector<double> normal_equations(const std::vector<std::vector<double>>& features, const std::vector<double>& y) {
  const std::size_t k = features.size();
  std::vector<std::vector<double>> a(k, std::vector<double>(k, 0.0));
  std::vector<double> b(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t r = 0; r < y.size(); ++r) a[i][j] += features[i][r] * features[j][r];
    for (std::size_t r = 0; r < y.size(); ++r) b[i] += features[i][r] * y[r];
  }
  return solve(a, b);
}

}  // namespace

TEST_CASE("refine a single slope") {
  Rng rng(51);
  const Matrix x = netsr::testing::random_inputs(rng, 50, 1, -1, 1);
  std::vector<double> y(50);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < 50; ++i) {
    y[i] = 2.0 * x(i, 0);
    sxy += x(i, 0) * y[i];
    sxx += x(i, 0) * x(i, 0);
  }
  const Expression e = parse("0.5*x1");
  const RefineResult r = refine(e, make_data(x, y));
  REQUIRE(constants(r.expression).size() == 1);
  CHECK(constants(r.expression)[0] == doctest::Approx(sxy / sxx).epsilon(1e-6));
  CHECK(std::abs(constants(r.expression)[0] - 2.0) < 1e-6);
  CHECK(r.mse < 1e-12);
  CHECK(r.initial_mse > r.mse);
  CHECK(r.converged);
}

TEST_CASE("expressions without constants are returned unchanged") {
  Rng rng(52);
  const Matrix x = netsr::testing::random_inputs(rng, 20, 1, -1, 1);
  std::vector<double> y(20, 1.0);
  const Expression e = parse("sin(x1)*x1");
  const RefineResult r = refine(e, make_data(x, y));
  CHECK(r.expression == e);
  CHECK(r.iterations == 0);
  CHECK(r.mse == doctest::Approx(guarded_mse(e, make_data(x, y))));
  CHECK(r.mse == r.initial_mse);
}

TEST_CASE("degenerate quadratic objective") {
  // Single point x1 = 3 with target 0: the objective is (c - 3)^2.
  const Expression e = Expression::unary(
      Op::Square, Expression::binary(Op::Sub, Expression::constant(-1.0), Expression::variable(0)));
  const RefineResult r = refine(e, make_data(Matrix(1, 1, 3.0), {0.0}));
  CHECK(constants(r.expression)[0] == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(r.mse < 1e-14);
}

TEST_CASE("linear-in-parameter fixtures reach the normal-equations solution") {
  Rng rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = netsr::testing::random_inputs(rng, 60, 2, -2, 2);
    const double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3), c = rng.uniform(-3, 3);
    std::vector<double> y(60);
    std::vector<std::vector<double>> features(3, std::vector<double>(60));
    for (std::size_t i = 0; i < 60; ++i) {
      features[0][i] = x(i, 0);
      features[1][i] = std::sin(x(i, 1));
      features[2][i] = 1.0;
      y[i] = a * features[0][i] + b * features[1][i] + c + 0.3 * rng.normal();
    }
    const auto exact = normal_equations(features, y);
    const Expression e = parse("0.1*x1 + 0.2*sin(x2) + 0.3");
    const RefineResult r = refine(e, make_data(x, y));
    const auto got = constants(r.expression);
    REQUIRE(got.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(got[k] - exact[k]) < 1e-5);
  }
}

TEST_CASE("refinement never increases the MSE") {
  Rng rng(54);
  const char* shapes[] = {"1.5*sin(0.8*x1) + 0.2", "exp(0.3*x1)*0.7 - x2", "0.4*log(1.2*x1^2 + 0.1)",
                          "tan(0.9*x1)*0.5 + cos(2*x2)", "2*x1/(x2 + 0.5)", "cosh(0.4*x1 - 0.3)*x2^2"};
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix x = netsr::testing::random_inputs(rng, 40, 2, -2, 2);
    std::vector<double> y(40);
    for (std::size_t i = 0; i < 40; ++i) y[i] = std::sin(3 * x(i, 0)) * x(i, 1) + rng.normal();
    Expression e = parse(shapes[trial % 6]);
    std::vector<double> c = constants(e);
    for (double& v : c) v *= rng.uniform(0.2, 2.0);
    e = with_constants(e, c);
    const Dataset data = make_data(x, y);
    const RefineResult r = refine(e, data);
    CHECK(r.mse <= r.initial_mse + 1e-12);
    CHECK(r.initial_mse == doctest::Approx(guarded_mse(e, data)));
    CHECK(r.mse == doctest::Approx(guarded_mse(r.expression, data)));
  }
}

TEST_CASE("refinement is deterministic") {
  Rng rng(55);
  const Matrix x = netsr::testing::random_inputs(rng, 30, 1, -1, 1);
  std::vector<double> y(30);
  for (std::size_t i = 0; i < 30; ++i) y[i] = std::exp(0.7 * x(i, 0)) - 1.0;
  const Expression e = parse("0.5*exp(0.2*x1) + 0.1");
  RefineConfig cfg;
  cfg.restarts = 3;
  cfg.seed = 9;
  const RefineResult a = refine(e, make_data(x, y), cfg), b = refine(e, make_data(x, y), cfg);
  CHECK(a.expression == b.expression);
  CHECK(a.mse == b.mse);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("non-finite initial objective returns the input") {
  const Expression e = parse("0.5*x1");
  std::vector<double> y{1.0, std::numeric_limits<double>::infinity()};
  const RefineResult r = refine(e, make_data(Matrix(2, 1, {1.0, 2.0}), y));
  CHECK(r.expression == e);
  CHECK_FALSE(r.converged);
}
