#pragma once

// Reverse-mode automatic differentiation over a tape of dense scalar, vector
// and matrix values. A tape is single-threaded; use one tape per thread.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "netsr/matrix.hpp"
#include "netsr/ops.hpp"

namespace netsr::ad {

enum class Rank : std::uint8_t { Scalar, Vector, Matrix };

struct Shape {
  Rank rank = Rank::Scalar;
  std::size_t rows = 1;
  std::size_t cols = 1;

  static constexpr Shape scalar() { return {Rank::Scalar, 1, 1}; }
  static constexpr Shape vector(std::size_t k) { return {Rank::Vector, k, 1}; }
  static constexpr Shape matrix(std::size_t r, std::size_t c) { return {Rank::Matrix, r, c}; }

  std::size_t size() const { return rows * cols; }
  std::string str() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Raised when a primitive receives operands of incompatible shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while the tape is
/// alive and has not been cleared.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  bool valid() const { return tape != nullptr; }
  const Shape& shape() const;
  std::span<const double> value() const;
  std::span<const double> grad() const;
  double item() const;
};

enum class Prim : std::uint8_t {
  Leaf,
  Affine,
  Add,
  Sub,
  Mul,
  Div,
  Unary,
  Sum,
  Mean,
  Abs,
  Sqrt,
  Pow,
  Softmax,
  LogProb,
  Entropy,
  Sigmoid,
  Tanh,
  Column,
  Stack,
  Concat,
  Pad,
  Scale,
  L05Star,
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var scalar(double v);
  Var vector(std::span<const double> v);
  Var matrix(const Matrix& m);
  Var leaf(Shape shape, std::span<const double> v);

  /// Populates adjoints of every node up to `root`. Adjoints are reset first,
  /// so calling twice yields identical gradients.
  void backward(Var root);

  /// Drops all nodes. Buffers are kept for reuse by the next build.
  void clear();

  std::size_t size() const { return size_; }
  const Shape& shape(Var v) const { return nodes_[v.id].shape; }
  std::span<const double> value(Var v) const { return nodes_[v.id].val; }
  std::span<const double> grad(Var v) const { return nodes_[v.id].adj; }

  struct Node {
    Prim prim = Prim::Leaf;
    Op op = Op::Id;
    bool guarded = false;
    Shape shape;
    std::vector<std::uint32_t> parents;
    double param = 0.0;
    std::size_t index = 0;
    std::vector<double> val;
    std::vector<double> adj;
  };

  // Appends a node and returns a reference to it with `val` sized to the
  // shape. Used by the primitive functions below.
  Node& push(Prim prim, Shape shape, std::initializer_list<Var> parents);
  Node& push(Prim prim, Shape shape, std::span<const Var> parents);
  Var handle() { return Var{this, static_cast<std::uint32_t>(size_ - 1)}; }
  const Node& node(std::uint32_t id) const { return nodes_[id]; }

 private:
  void backward_node(Node& n);

  std::vector<Node> nodes_;
  std::size_t size_ = 0;
};

// Primitives. Elementwise binary operations accept equal shapes or a scalar
// on either side (broadcast).
Var affine(Var weight, Var input, Var bias = {});
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b, bool guarded = true);
Var binary(Op op, Var a, Var b, bool guarded);
Var unary(Op op, Var x, bool guarded);
Var identity(Var x);
Var neg(Var x);
Var sin(Var x);
Var cos(Var x);
Var tan(Var x, bool guarded = true);
Var exp(Var x, bool guarded = true);
Var log(Var x, bool guarded = true);
Var cosh(Var x, bool guarded = true);
Var square(Var x);
Var sum(Var x);
Var mean(Var x);
Var abs(Var x);
Var sqrt(Var x);
Var pow(Var x, double exponent);
Var sigmoid(Var x);
Var tanh(Var x);
Var scale(Var x, double factor);
Var softmax(Var logits);
Var categorical_log_prob(Var logits, std::size_t index);
Var categorical_entropy(Var logits);
Var column(Var m, std::size_t j);
Var stack_columns(std::span<const Var> columns);
Var concat(std::span<const Var> parts);
Var pad(Var x, std::size_t size);
Var l05_star(Var x, double transition);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }

/// Unary operator with the numeric guards applied (see ops.hpp).
double guarded_eval(Op op, double x);

}  // namespace netsr::ad
