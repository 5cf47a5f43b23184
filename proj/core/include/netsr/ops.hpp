#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace netsr {

/// Operators that can appear as symbolic-network units or expression nodes.
/// `Neg` only appears in expressions (produced by parsing and simplification).
enum class Op : std::uint8_t {
  Id,
  Neg,
  Sin,
  Cos,
  Tan,
  Exp,
  Log,
  Cosh,
  Square,
  Add,
  Sub,
  Mul,
  Div,
};

constexpr int arity(Op op) {
  switch (op) {
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
      return 2;
    default:
      return 1;
  }
}

constexpr bool is_unary(Op op) { return arity(op) == 1; }
constexpr bool is_binary(Op op) { return arity(op) == 2; }

std::string_view op_name(Op op);
std::optional<Op> op_from_name(std::string_view name);

/// {+, -, *, sin, cos, tan, exp, log, cosh, square} plus Id.
std::vector<Op> default_operator_library();

namespace guard {
inline constexpr double kLogFloor = 1e-10;
inline constexpr double kExpCap = 20.0;
inline constexpr double kClamp = 1e10;
inline constexpr double kDivFloor = 1e-6;
}  // namespace guard

// Pointwise semantics shared by the tape, the network forward pass and
// expression evaluation. With `guarded` set, every unary result is finite
// for finite input and division never divides by less than 1e-6 in magnitude.
double eval_unary(Op op, double x, bool guarded);
double eval_binary(Op op, double a, double b, bool guarded);

// d/dx of eval_unary; zero wherever a guard clamps.
double deriv_unary(Op op, double x, bool guarded);

struct BinaryPartials {
  double da;
  double db;
};
BinaryPartials deriv_binary(Op op, double a, double b, bool guarded);

}  // namespace netsr
