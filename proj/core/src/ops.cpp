#include "netsr/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

namespace netsr {

namespace {

constexpr std::array<std::pair<Op, std::string_view>, 13> kNames{{
    {Op::Id, "id"},
    {Op::Neg, "neg"},
    {Op::Sin, "sin"},
    {Op::Cos, "cos"},
    {Op::Tan, "tan"},
    {Op::Exp, "exp"},
    {Op::Log, "log"},
    {Op::Cosh, "cosh"},
    {Op::Square, "square"},
    {Op::Add, "add"},
    {Op::Sub, "sub"},
    {Op::Mul, "mul"},
    {Op::Div, "div"},
}};

double guarded_denominator(double d) {
  const double mag = std::max(std::abs(d), guard::kDivFloor);
  return d < 0.0 ? -mag : mag;
}

}  // namespace

std::string_view op_name(Op op) {
  for (const auto& [o, n] : kNames) {
    if (o == op) return n;
  }
  return "?";
}

std::optional<Op> op_from_name(std::string_view name) {
  for (const auto& [o, n] : kNames) {
    if (n == name) return o;
  }
  if (name == "+") return Op::Add;
  if (name == "-") return Op::Sub;
  if (name == "*") return Op::Mul;
  if (name == "/") return Op::Div;
  if (name == "identity") return Op::Id;
  return std::nullopt;
}

std::vector<Op> default_operator_library() {
  return {Op::Add, Op::Sub, Op::Mul, Op::Sin, Op::Cos, Op::Tan, Op::Exp, Op::Log, Op::Cosh, Op::Square, Op::Id};
}

double eval_unary(Op op, double x, bool guarded) {
  switch (op) {
    case Op::Id:
      return x;
    case Op::Neg:
      return -x;
    case Op::Sin:
      return std::sin(x);
    case Op::Cos:
      return std::cos(x);
    case Op::Tan: {
      const double t = std::tan(x);
      return guarded ? std::clamp(t, -guard::kClamp, guard::kClamp) : t;
    }
    case Op::Exp:
      return std::exp(guarded ? std::min(x, guard::kExpCap) : x);
    case Op::Log:
      return guarded ? std::log(std::max(std::abs(x), guard::kLogFloor)) : std::log(x);
    case Op::Cosh:
      return std::cosh(guarded ? std::clamp(x, -guard::kExpCap, guard::kExpCap) : x);
    case Op::Square: {
      const double v = guarded ? std::clamp(x, -guard::kClamp, guard::kClamp) : x;
      return v * v;
    }
    default:
      return std::nan("");
  }
}

double eval_binary(Op op, double a, double b, bool guarded) {
  switch (op) {
    case Op::Add:
      return a + b;
    case Op::Sub:
      return a - b;
    case Op::Mul:
      return a * b;
    case Op::Div:
      return a / (guarded ? guarded_denominator(b) : b);
    default:
      return std::nan("");
  }
}

double deriv_unary(Op op, double x, bool guarded) {
  switch (op) {
    case Op::Id:
      return 1.0;
    case Op::Neg:
      return -1.0;
    case Op::Sin:
      return std::cos(x);
    case Op::Cos:
      return -std::sin(x);
    case Op::Tan: {
      const double t = std::tan(x);
      if (guarded && std::abs(t) > guard::kClamp) return 0.0;
      return 1.0 + t * t;
    }
    case Op::Exp:
      if (guarded && x > guard::kExpCap) return 0.0;
      return std::exp(x);
    case Op::Log:
      if (guarded && std::abs(x) < guard::kLogFloor) return 0.0;
      return 1.0 / x;
    case Op::Cosh:
      if (guarded && std::abs(x) > guard::kExpCap) return 0.0;
      return std::sinh(x);
    case Op::Square:
      if (guarded && std::abs(x) > guard::kClamp) return 0.0;
      return 2.0 * x;
    default:
      return std::nan("");
  }
}

BinaryPartials deriv_binary(Op op, double a, double b, bool guarded) {
  switch (op) {
    case Op::Add:
      return {1.0, 1.0};
    case Op::Sub:
      return {1.0, -1.0};
    case Op::Mul:
      return {b, a};
    case Op::Div: {
      if (guarded && std::abs(b) < guard::kDivFloor) {
        return {1.0 / guarded_denominator(b), 0.0};
      }
      return {1.0 / b, -a / (b * b)};
    }
    default:
      return {std::nan(""), std::nan("")};
  }
}

}  // namespace netsr
