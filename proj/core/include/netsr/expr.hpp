#pragma once

// Immutable algebraic expression trees.

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "netsr/autodiff.hpp"
#include "netsr/matrix.hpp"
#include "netsr/ops.hpp"

namespace netsr {

struct SymbolicNetwork;

enum class NodeKind : std::uint8_t { Variable, Constant, Unary, Binary };

class Expression {
 public:
  /// Defaults to Constant(0).
  Expression();

  static Expression variable(std::size_t index);
  static Expression constant(double value);
  static Expression unary(Op op, Expression child);
  static Expression binary(Op op, Expression left, Expression right);

  NodeKind kind() const { return node_->kind; }
  Op op() const { return node_->op; }
  double value() const { return node_->value; }
  std::size_t variable_index() const { return node_->index; }
  const Expression& child(std::size_t i) const { return node_->children[i]; }
  std::size_t child_count() const;

  bool is_constant() const { return kind() == NodeKind::Constant; }
  bool is_constant(double v) const { return is_constant() && value() == v; }

  /// Structural equality (constants compared exactly).
  friend bool operator==(const Expression& a, const Expression& b);

 private:
  struct Node {
    NodeKind kind = NodeKind::Constant;
    Op op = Op::Id;
    double value = 0.0;
    std::size_t index = 0;
    std::vector<Expression> children;
  };

  explicit Expression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

/// Evaluation at every row of `x`. Guarded mode uses the numeric guards of
/// the operator semantics; unguarded mode propagates NaN/inf.
std::vector<double> evaluate(const Expression& e, const Matrix& x, bool guarded);
double evaluate_point(const Expression& e, std::span<const double> x, bool guarded);

/// Largest variable index used, plus one (0 for variable-free trees).
std::size_t variable_count(const Expression& e);

/// Node count.
std::size_t complexity(const Expression& e);
std::size_t depth(const Expression& e);

/// Constant folding, identity removal, double negation, flattening of sums
/// and products with constant merging. Runs a bounded number of passes.
Expression simplify(const Expression& e);

/// Symbolic forward pass through a (pruned) network, followed by simplify().
Expression extract(const SymbolicNetwork& net);

/// Constant values in pre-order; the order is the refinement slot order.
std::vector<double> constants(const Expression& e);
/// Replaces constants in pre-order. `values.size()` must equal the number of
/// constants.
Expression with_constants(const Expression& e, std::span<const double> values);

struct FormatOptions {
  int digits = 6;
};

std::string to_string(const Expression& e, FormatOptions options = {});

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t position);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Infix grammar: + - * / ^, unary minus, parentheses, numbers, pi,
/// variables x1..xd, and the functions sin cos tan exp log ln cosh sinh sqrt.
/// Integer powers up to 9 become repeated products (^2 becomes square);
/// other powers become exp(p*log(base)).
Expression parse(std::string_view text);

nlohmann::json to_json(const Expression& e);

/// Records the expression on a tape. `constant_leaves` holds one scalar per
/// constant in pre-order; `columns` holds one vector per input variable.
ad::Var to_tape(const Expression& e, std::span<const ad::Var> constant_leaves, std::span<const ad::Var> columns,
                bool guarded);

}  // namespace netsr
