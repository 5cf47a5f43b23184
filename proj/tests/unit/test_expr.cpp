#include <doctest.h>

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "netsr/expr.hpp"
#include "netsr/symnet.hpp"
#include "oracles.hpp"

using namespace netsr;

namespace {

Expression x(std::size_t i = 0) { return Expression::variable(i); }
Expression c(double v) { return Expression::constant(v); }
Expression un(Op op, Expression a) { return Expression::unary(op, std::move(a)); }
Expression bin(Op op, Expression a, Expression b) { return Expression::binary(op, std::move(a), std::move(b)); }

double at(const Expression& e, double v) {
  const double p[] = {v};
  return evaluate_point(e, p, false);
}

// Random tree over the library operators, with constants and two variables.
Expression random_expression(Rng& rng, int depth) {
  if (depth == 0 || rng.uniform() < 0.25) {
    if (rng.uniform() < 0.6) return x(rng.below(2));
    return c(std::round(rng.uniform(-3, 3) * 100) / 100);
  }
  static const Op unary_ops[] = {Op::Id, Op::Neg, Op::Sin, Op::Cos, Op::Exp, Op::Log, Op::Square, Op::Tan, Op::Cosh};
  static const Op binary_ops[] = {Op::Add, Op::Sub, Op::Mul, Op::Div};
  if (rng.uniform() < 0.4) return un(unary_ops[rng.below(9)], random_expression(rng, depth - 1));
  return bin(binary_ops[rng.below(4)], random_expression(rng, depth - 1), random_expression(rng, depth - 1));
}

// True when both expressions agree within `tol` (relative to magnitude) at
// every point where the original is well conditioned.
bool agree(const Expression& a, const Expression& b, const Matrix& pts, double tol) {
  const auto va = evaluate(a, pts, false);
  const auto vb = evaluate(b, pts, false);
  for (std::size_t i = 0; i < va.size(); ++i) {
    if (!netsr::testing::expression_clear_at(a, pts.row(i))) continue;
    if (std::abs(va[i] - vb[i]) > tol * std::max(1.0, std::abs(va[i]))) return false;
  }
  return true;
}

SymbolicNetwork single_layer(std::vector<Op> ops, Matrix w, Matrix readout) {
  SymbolicNetwork net = instantiate(ArchitectureDescriptor{{std::move(ops)}}, w.cols, 0);
  net.weights[0] = std::move(w);
  net.weights[1] = std::move(readout);
  return net;
}

}  // namespace

TEST_CASE("extract examples") {
  const auto sin_net = single_layer({Op::Sin}, Matrix(1, 1, 1.3), Matrix(1, 1, 2.0));
  const Expression e = extract(sin_net);
  CHECK(e == bin(Op::Mul, c(2.0), un(Op::Sin, bin(Op::Mul, c(1.3), x()))));
  CHECK(to_string(e) == "2*sin(1.3*x1)");

  const auto zero = single_layer({Op::Sin, Op::Cos}, Matrix(2, 1, 1.0), Matrix(1, 2, 0.0));
  CHECK(extract(zero) == c(0.0));

  const auto sq = single_layer({Op::Mul}, Matrix(2, 1, 1.0), Matrix(1, 1, 1.0));
  CHECK(extract(sq) == un(Op::Square, x()));
  CHECK(to_string(extract(sq)) == "x1^2");
}

TEST_CASE("extract includes biases") {
  SymbolicNetwork net = instantiate(ArchitectureDescriptor{{{Op::Id}}}, 1, 0, true);
  net.weights[0] = Matrix(1, 1, 2.0);
  net.weights[1] = Matrix(1, 1, 1.0);
  net.biases[0] = {0.5};
  net.biases[1] = {-1.0};
  const Expression e = extract(net);
  for (double v : {-1.0, 0.0, 2.5}) CHECK(at(e, v) == doctest::Approx(2 * v + 0.5 - 1.0));
}

TEST_CASE("extraction agrees with the network forward pass") {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const bool bias = trial % 3 == 0;
    SymbolicNetwork net = instantiate(netsr::testing::random_descriptor(rng), 2, rng.next_u64(), bias);
    net = prune(netsr::testing::sparsify(net, rng, 0.3), 0.01);
    const Matrix pts = netsr::testing::random_inputs(rng, 100, 2, -1, 1);
    const Expression e = extract(net);
    const auto ve = evaluate(e, pts, true);
    const auto vn = forward(net, pts, true);
    CAPTURE(net.descriptor.str());
    CAPTURE(to_string(e));
    for (std::size_t i = 0; i < vn.size(); ++i) {
      REQUIRE(std::abs(ve[i] - vn[i]) <= 1e-6 * std::max(1.0, std::abs(vn[i])));
    }
  }
}

TEST_CASE("unguarded extraction matches unguarded forward where no guard activates") {
  Rng rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix pts = netsr::testing::random_inputs(rng, 20, 2, -1, 1);
    const SymbolicNetwork net = prune(netsr::testing::random_clear_network(rng, pts, trial % 2 == 0), 0.01);
    if (!netsr::testing::clear_of_guards(net, pts)) continue;
    const auto ve = evaluate(extract(net), pts, false);
    const auto vn = forward(net, pts, false);
    for (std::size_t i = 0; i < vn.size(); ++i) CHECK(ve[i] == doctest::Approx(vn[i]).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("simplify examples") {
  CHECK(simplify(bin(Op::Mul, bin(Op::Add, x(), c(0)), c(1))) == x());
  CHECK(simplify(un(Op::Sin, c(0.0))) == c(0.0));
  CHECK(simplify(bin(Op::Mul, c(0), un(Op::Exp, x()))) == c(0.0));
  CHECK(simplify(un(Op::Neg, un(Op::Neg, x()))) == x());
  const Expression nested = bin(Op::Mul, c(2), bin(Op::Mul, c(3), x()));
  const Expression flat = simplify(nested);
  CHECK(flat == bin(Op::Mul, c(6), x()));
  Rng rng(43);
  for (int i = 0; i < 10; ++i) {
    const double v = rng.uniform(-5, 5);
    CHECK(at(flat, v) == doctest::Approx(at(nested, v)));
  }
  CHECK(simplify(bin(Op::Sub, x(), x())) == c(0.0));
  CHECK(simplify(bin(Op::Add, bin(Op::Mul, c(2), x()), bin(Op::Mul, c(3), x()))) == bin(Op::Mul, c(5), x()));
  CHECK(simplify(bin(Op::Div, x(), c(1))) == x());
}

TEST_CASE("simplify does not fold through a guard") {
  const Expression e = un(Op::Log, c(0.0));
  CHECK(simplify(e) == e);
  CHECK(std::isnan(at(un(Op::Log, c(-1.0)), 0.0)));
}

TEST_CASE("simplify preserves semantics and never grows the tree") {
  Rng rng(44);
  const Matrix pts = netsr::testing::random_inputs(rng, 200, 2, -2, 2);
  for (int trial = 0; trial < 500; ++trial) {
    const Expression e = random_expression(rng, 5);
    const Expression s = simplify(e);
    CAPTURE(to_string(e, {17}));
    CAPTURE(to_string(s, {17}));
    REQUIRE(complexity(s) <= complexity(e));
    REQUIRE(agree(e, s, pts, 1e-9));
    REQUIRE(simplify(s) == simplify(simplify(s)));
  }
}

TEST_CASE("evaluate examples") {
  const Expression n1 = parse("x1^3+x1^2+x1");
  CHECK(at(n1, 1.0) == 3.0);
  CHECK(at(parse("sin(x1^2)*cos(x1)-1"), 0.0) == -1.0);
  CHECK(std::isnan(at(un(Op::Log, x()), -1.0)));
  const double p[] = {-1.0};
  CHECK(evaluate_point(un(Op::Log, x()), p, true) == 0.0);

  Matrix pts(3, 1, {0.0, 1.0, 2.0});
  const auto v = evaluate(n1, pts, false);
  CHECK(v == std::vector<double>{0.0, 3.0, 14.0});
}

TEST_CASE("to_string examples") {
  CHECK(to_string(bin(Op::Add, x(), c(1))) == "x1 + 1");
  CHECK(to_string(bin(Op::Mul, c(2), un(Op::Sin, bin(Op::Mul, c(1.3), x())))) == "2*sin(1.3*x1)");
  CHECK(to_string(bin(Op::Sub, x(), bin(Op::Sub, x(1), c(2)))) == "x1 - (x2 - 2)");
  CHECK(to_string(bin(Op::Div, x(), bin(Op::Mul, x(1), c(2)))) == "x1/(x2*2)");
  CHECK(to_string(c(std::numbers::pi), {3}) == "3.14");
  CHECK(to_string(un(Op::Square, bin(Op::Add, x(), c(1)))) == "(x1 + 1)^2");
}

TEST_CASE("parse and render round trip") {
  Rng rng(45);
  const Matrix pts = netsr::testing::random_inputs(rng, 20, 2, -2, 2);
  const Expression nested = parse("(x1+1)^3/(x1^2-x1+1)");
  const std::string text = to_string(nested);
  CHECK(text.find('(') != std::string::npos);
  CHECK(agree(nested, parse(text), pts, 1e-12));
  for (int trial = 0; trial < 300; ++trial) {
    const Expression e = random_expression(rng, 5);
    const std::string s = to_string(e, {17});
    CAPTURE(s);
    REQUIRE(agree(e, parse(s), pts, 1e-12));
  }
}

TEST_CASE("parse examples") {
  const Expression n1 = bin(
      Op::Add, bin(Op::Add, bin(Op::Mul, bin(Op::Mul, x(), x()), x()), un(Op::Square, x())), x());
  CHECK(parse("x1^3+x1^2+x1") == n1);
  CHECK(complexity(n1) == 10);

  const Expression n7 = bin(Op::Add, un(Op::Log, bin(Op::Add, x(), c(1))),
                            un(Op::Log, bin(Op::Add, un(Op::Square, x()), c(1))));
  CHECK(parse("log(x1+1)+log(x1^2+1)") == n7);
  CHECK(parse("ln(x1)") == un(Op::Log, x()));
  CHECK(parse("-2.5*x2") == bin(Op::Mul, c(-2.5), x(1)));
  CHECK(at(parse("sqrt(x1)"), 4.0) == doctest::Approx(2.0));
  CHECK(at(parse("sinh(x1)"), 0.7) == doctest::Approx(std::sinh(0.7)));
  CHECK(at(parse("x1^-2"), 2.0) == doctest::Approx(0.25));
  CHECK(at(parse("pi*x1"), 1.0) == doctest::Approx(std::numbers::pi));
  CHECK(at(parse("x1^9"), 1.1) == doctest::Approx(std::pow(1.1, 9)));
  CHECK(at(parse("x1^x1"), 2.0) == doctest::Approx(4.0));
  CHECK(at(parse("2^3^2"), 0.0) == doctest::Approx(512.0));
}

TEST_CASE("parse errors carry positions") {
  CHECK_THROWS_AS(parse("sin("), ParseError);
  CHECK_THROWS_AS(parse("foo(x1)"), ParseError);
  CHECK_THROWS_AS(parse("x0"), ParseError);
  CHECK_THROWS_AS(parse("x1 +"), ParseError);
  CHECK_THROWS_AS(parse("x1 x2"), ParseError);
  CHECK_THROWS_AS(parse(""), ParseError);
  try {
    parse("x1 + * 2");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.position() == 5);
  }
}

TEST_CASE("complexity and depth") {
  CHECK(complexity(c(3)) == 1);
  CHECK(complexity(bin(Op::Add, x(), c(1))) == 3);
  CHECK(depth(c(3)) == 1);
  CHECK(depth(un(Op::Sin, bin(Op::Add, x(), c(1)))) == 3);
  CHECK(variable_count(parse("x1 + x3")) == 3);
  CHECK(variable_count(c(2)) == 0);
}

TEST_CASE("constant slots follow pre-order") {
  const Expression e = bin(Op::Add, bin(Op::Mul, c(2), un(Op::Sin, bin(Op::Mul, c(3), x()))), c(4));
  CHECK(constants(e) == std::vector<double>{2, 3, 4});
  const double repl[] = {5, 6, 7};
  const Expression r = with_constants(e, repl);
  CHECK(constants(r) == std::vector<double>{5, 6, 7});
  CHECK(at(r, 0.5) == doctest::Approx(5 * std::sin(3.0) + 7));
  const double wrong[] = {1};
  CHECK_THROWS_AS(with_constants(e, wrong), std::invalid_argument);
}

TEST_CASE("extraction slot order is stable") {
  Rng rng(46);
  const SymbolicNetwork net = instantiate(netsr::testing::random_descriptor(rng), 2, 77);
  CHECK(constants(extract(net)) == constants(extract(net)));
}

TEST_CASE("expression JSON") {
  const auto doc = to_json(bin(Op::Add, x(), c(1.5)));
  CHECK(doc["type"] == "add");
  CHECK(doc["children"][0]["type"] == "var");
  CHECK(doc["children"][0]["index"] == 0);
  CHECK(doc["children"][1]["value"] == 1.5);
}

TEST_CASE("expression on a tape matches evaluation and differences") {
  Rng rng(47);
  const Matrix pts = netsr::testing::random_inputs(rng, 10, 2, 0.2, 1.5);
  const Expression e = parse("2.5*sin(1.2*x1)*x2 + exp(-0.3*x1) - 0.7");
  std::vector<double> consts = constants(e);
  auto objective = [&](const std::vector<double>& p, std::vector<double>* grad) {
    ad::Tape tape;
    std::vector<ad::Var> leaves, cols;
    for (double v : p) leaves.push_back(tape.scalar(v));
    for (std::size_t j = 0; j < pts.cols; ++j) {
      std::vector<double> col(pts.rows);
      for (std::size_t i = 0; i < pts.rows; ++i) col[i] = pts(i, j);
      cols.push_back(tape.vector(col));
    }
    const ad::Var out = ad::mean(ad::square(to_tape(e, leaves, cols, true)));
    if (grad) {
      tape.backward(out);
      grad->clear();
      for (const auto& l : leaves) grad->push_back(l.grad()[0]);
    }
    return out.item();
  };
  const auto direct = evaluate(e, pts, true);
  double expected = 0.0;
  for (double v : direct) expected += v * v / static_cast<double>(direct.size());
  std::vector<double> grad;
  CHECK(objective(consts, &grad) == doctest::Approx(expected));
  const auto fd =
      netsr::testing::central_differences([&](const std::vector<double>& p) { return objective(p, nullptr); }, consts);
  CHECK(netsr::testing::relative_error(grad, fd) < 1e-6);
}
