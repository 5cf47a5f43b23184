#include "netsr/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "netsr/regularizer.hpp"

namespace netsr::ad {

std::string Shape::str() const {
  switch (rank) {
    case Rank::Scalar:
      return "scalar";
    case Rank::Vector:
      return "vector(" + std::to_string(rows) + ")";
    case Rank::Matrix:
      return "matrix(" + std::to_string(rows) + "," + std::to_string(cols) + ")";
  }
  return "?";
}

const Shape& Var::shape() const { return tape->shape(*this); }
std::span<const double> Var::value() const { return tape->value(*this); }
std::span<const double> Var::grad() const { return tape->grad(*this); }
double Var::item() const { return tape->value(*this)[0]; }

double guarded_eval(Op op, double x) { return eval_unary(op, x, true); }

// ---------------------------------------------------------------------------
// Tape

Tape::Node& Tape::push(Prim prim, Shape shape, std::initializer_list<Var> parents) {
  return push(prim, shape, std::span<const Var>(parents.begin(), parents.size()));
}

Tape::Node& Tape::push(Prim prim, Shape shape, std::span<const Var> parents) {
  if (size_ == nodes_.size()) nodes_.emplace_back();
  Node& n = nodes_[size_++];
  n.prim = prim;
  n.op = Op::Id;
  n.guarded = false;
  n.shape = shape;
  n.param = 0.0;
  n.index = 0;
  n.parents.clear();
  for (const Var& p : parents) n.parents.push_back(p.id);
  n.val.resize(shape.size());
  n.adj.resize(shape.size());
  return n;
}

Var Tape::leaf(Shape shape, std::span<const double> v) {
  if (v.size() != shape.size()) {
    throw ShapeError("leaf: " + std::to_string(v.size()) + " values for shape " + shape.str());
  }
  Node& n = push(Prim::Leaf, shape, {});
  std::copy(v.begin(), v.end(), n.val.begin());
  return handle();
}

Var Tape::scalar(double v) { return leaf(Shape::scalar(), std::span<const double>(&v, 1)); }
Var Tape::vector(std::span<const double> v) { return leaf(Shape::vector(v.size()), v); }
Var Tape::matrix(const Matrix& m) { return leaf(Shape::matrix(m.rows, m.cols), m.data); }

void Tape::clear() { size_ = 0; }

void Tape::backward(Var root) {
  if (root.tape != this) throw std::invalid_argument("backward: root belongs to another tape");
  if (shape(root).size() != 1 || shape(root).rank != Rank::Scalar) {
    throw ShapeError("backward: root must be scalar, got " + shape(root).str());
  }
  for (std::size_t i = 0; i < size_; ++i) std::fill(nodes_[i].adj.begin(), nodes_[i].adj.end(), 0.0);
  nodes_[root.id].adj[0] = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) backward_node(nodes_[i]);
}

namespace {

// Broadcast-aware accessors for elementwise binary ops.
inline double at(const std::vector<double>& v, std::size_t i) { return v.size() == 1 ? v[0] : v[i]; }
inline void acc(std::vector<double>& g, std::size_t i, double d) {
  if (g.size() == 1)
    g[0] += d;
  else
    g[i] += d;
}

double log_sum_exp(std::span<const double> x) {
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

void softmax_into(std::span<const double> x, std::span<double> out) {
  const double lse = log_sum_exp(x);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::exp(x[i] - lse);
}

}  // namespace

void Tape::backward_node(Node& n) {
  const auto& g = n.adj;
  switch (n.prim) {
    case Prim::Leaf:
      return;
    case Prim::Affine: {
      Node& w = nodes_[n.parents[0]];
      Node& x = nodes_[n.parents[1]];
      const std::size_t r = w.shape.rows, c = w.shape.cols;
      const std::size_t batch = x.shape.rank == Rank::Matrix ? x.shape.rows : 1;
      for (std::size_t k = 0; k < batch; ++k) {
        const double* xk = x.val.data() + k * c;
        double* gxk = x.adj.data() + k * c;
        const double* gk = g.data() + k * r;
        for (std::size_t i = 0; i < r; ++i) {
          const double gi = gk[i];
          if (gi == 0.0) continue;
          double* gw = w.adj.data() + i * c;
          const double* wi = w.val.data() + i * c;
          for (std::size_t j = 0; j < c; ++j) {
            gw[j] += gi * xk[j];
            gxk[j] += gi * wi[j];
          }
        }
      }
      if (n.parents.size() == 3) {
        Node& b = nodes_[n.parents[2]];
        for (std::size_t k = 0; k < batch; ++k)
          for (std::size_t i = 0; i < r; ++i) b.adj[i] += g[k * r + i];
      }
      return;
    }
    case Prim::Add:
    case Prim::Sub:
    case Prim::Mul:
    case Prim::Div: {
      Node& a = nodes_[n.parents[0]];
      Node& b = nodes_[n.parents[1]];
      const std::size_t len = n.val.size();
      if (n.prim == Prim::Add) {
        for (std::size_t i = 0; i < len; ++i) {
          acc(a.adj, i, g[i]);
          acc(b.adj, i, g[i]);
        }
      } else if (n.prim == Prim::Sub) {
        for (std::size_t i = 0; i < len; ++i) {
          acc(a.adj, i, g[i]);
          acc(b.adj, i, -g[i]);
        }
      } else if (n.prim == Prim::Mul) {
        for (std::size_t i = 0; i < len; ++i) {
          acc(a.adj, i, g[i] * at(b.val, i));
          acc(b.adj, i, g[i] * at(a.val, i));
        }
      } else {
        for (std::size_t i = 0; i < len; ++i) {
          const auto d = deriv_binary(Op::Div, at(a.val, i), at(b.val, i), n.guarded);
          acc(a.adj, i, g[i] * d.da);
          acc(b.adj, i, g[i] * d.db);
        }
      }
      return;
    }
    case Prim::Unary: {
      Node& x = nodes_[n.parents[0]];
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i] != 0.0) x.adj[i] += g[i] * deriv_unary(n.op, x.val[i], n.guarded);
      }
      return;
    }
    case Prim::Sum:
    case Prim::Mean: {
      Node& x = nodes_[n.parents[0]];
      const double d = n.prim == Prim::Sum ? g[0] : g[0] / static_cast<double>(x.val.size());
      for (double& v : x.adj) v += d;
      return;
    }
    case Prim::Abs: {
      Node& x = nodes_[n.parents[0]];
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = x.val[i] > 0.0 ? 1.0 : (x.val[i] < 0.0 ? -1.0 : 0.0);
        x.adj[i] += g[i] * s;
      }
      return;
    }
    case Prim::Sqrt: {
      Node& x = nodes_[n.parents[0]];
      for (std::size_t i = 0; i < g.size(); ++i) x.adj[i] += g[i] * 0.5 / n.val[i];
      return;
    }
    case Prim::Pow: {
      Node& x = nodes_[n.parents[0]];
      for (std::size_t i = 0; i < g.size(); ++i)
        x.adj[i] += g[i] * n.param * std::pow(x.val[i], n.param - 1.0);
      return;
    }
    case Prim::Sigmoid: {
      Node& x = nodes_[n.parents[0]];
      for (std::size_t i = 0; i < g.size(); ++i) x.adj[i] += g[i] * n.val[i] * (1.0 - n.val[i]);
      return;
    }
    case Prim::Tanh: {
      Node& x = nodes_[n.parents[0]];
      for (std::size_t i = 0; i < g.size(); ++i) x.adj[i] += g[i] * (1.0 - n.val[i] * n.val[i]);
      return;
    }
    case Prim::Scale: {
      Node& x = nodes_[n.parents[0]];
      for (std::size_t i = 0; i < g.size(); ++i) x.adj[i] += g[i] * n.param;
      return;
    }
    case Prim::L05Star: {
      Node& x = nodes_[n.parents[0]];
      for (std::size_t i = 0; i < g.size(); ++i) x.adj[i] += g[i] * l05_star_derivative(x.val[i], n.param);
      return;
    }
    case Prim::Softmax: {
      Node& x = nodes_[n.parents[0]];
      double dot = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * n.val[i];
      for (std::size_t i = 0; i < g.size(); ++i) x.adj[i] += n.val[i] * (g[i] - dot);
      return;
    }
    case Prim::LogProb: {
      Node& x = nodes_[n.parents[0]];
      const double lse = log_sum_exp(x.val);
      for (std::size_t i = 0; i < x.val.size(); ++i) {
        const double p = std::exp(x.val[i] - lse);
        x.adj[i] += g[0] * ((i == n.index ? 1.0 : 0.0) - p);
      }
      return;
    }
    case Prim::Entropy: {
      Node& x = nodes_[n.parents[0]];
      const double lse = log_sum_exp(x.val);
      const double h = n.val[0];
      for (std::size_t i = 0; i < x.val.size(); ++i) {
        const double logp = x.val[i] - lse;
        x.adj[i] += g[0] * (-std::exp(logp) * (logp + h));
      }
      return;
    }
    case Prim::Column: {
      Node& m = nodes_[n.parents[0]];
      const std::size_t cols = m.shape.cols;
      for (std::size_t k = 0; k < g.size(); ++k) m.adj[k * cols + n.index] += g[k];
      return;
    }
    case Prim::Stack: {
      const std::size_t cols = n.parents.size();
      for (std::size_t j = 0; j < cols; ++j) {
        Node& c = nodes_[n.parents[j]];
        for (std::size_t k = 0; k < c.adj.size(); ++k) c.adj[k] += g[k * cols + j];
      }
      return;
    }
    case Prim::Concat: {
      std::size_t offset = 0;
      for (auto pid : n.parents) {
        Node& p = nodes_[pid];
        for (std::size_t k = 0; k < p.adj.size(); ++k) p.adj[k] += g[offset + k];
        offset += p.adj.size();
      }
      return;
    }
    case Prim::Pad: {
      Node& x = nodes_[n.parents[0]];
      for (std::size_t k = 0; k < x.adj.size(); ++k) x.adj[k] += g[k];
      return;
    }
  }
}

// ---------------------------------------------------------------------------
// Primitives

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw std::invalid_argument("autodiff: invalid variable handle");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  Tape& t = tape_of(a);
  if (b.tape != &t) throw std::invalid_argument("autodiff: operands live on different tapes");
  return t;
}

Shape broadcast_shape(const char* op, Var a, Var b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) return sa;
  if (sa.rank == Rank::Scalar) return sb;
  if (sb.rank == Rank::Scalar) return sa;
  throw ShapeError(std::string(op) + ": incompatible shapes " + sa.str() + " and " + sb.str());
}

template <class F>
Var elementwise_unary(Prim prim, Var x, F f, double param = 0.0) {
  Tape& t = tape_of(x);
  const Shape s = x.shape();
  Tape::Node& n = t.push(prim, s, {x});
  n.param = param;
  const auto& xv = t.node(x.id).val;
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = f(xv[i]);
  return t.handle();
}

const char* binary_name(Prim p) {
  switch (p) {
    case Prim::Add:
      return "add";
    case Prim::Sub:
      return "sub";
    case Prim::Mul:
      return "mul";
    default:
      return "div";
  }
}

Var elementwise_binary(Prim prim, Var a, Var b, bool guarded) {
  Tape& t = tape_of(a, b);
  const Shape s = broadcast_shape(binary_name(prim), a, b);
  Tape::Node& n = t.push(prim, s, {a, b});
  n.guarded = guarded;
  const auto& av = t.node(a.id).val;
  const auto& bv = t.node(b.id).val;
  const std::size_t len = n.val.size();
  switch (prim) {
    case Prim::Add:
      for (std::size_t i = 0; i < len; ++i) n.val[i] = at(av, i) + at(bv, i);
      break;
    case Prim::Sub:
      for (std::size_t i = 0; i < len; ++i) n.val[i] = at(av, i) - at(bv, i);
      break;
    case Prim::Mul:
      for (std::size_t i = 0; i < len; ++i) n.val[i] = at(av, i) * at(bv, i);
      break;
    default:
      for (std::size_t i = 0; i < len; ++i) n.val[i] = eval_binary(Op::Div, at(av, i), at(bv, i), guarded);
      break;
  }
  return t.handle();
}

}  // namespace

Var affine(Var weight, Var input, Var bias) {
  Tape& t = tape_of(weight, input);
  const Shape& ws = weight.shape();
  const Shape& xs = input.shape();
  if (ws.rank != Rank::Matrix) throw ShapeError("affine: weight must be a matrix, got " + ws.str());
  const std::size_t r = ws.rows, c = ws.cols;
  Shape out;
  std::size_t batch = 1;
  if (xs.rank == Rank::Vector && xs.rows == c) {
    out = Shape::vector(r);
  } else if (xs.rank == Rank::Matrix && xs.cols == c) {
    batch = xs.rows;
    out = Shape::matrix(batch, r);
  } else if (xs.rank == Rank::Scalar && c == 1) {
    out = Shape::vector(r);
  } else {
    throw ShapeError("affine: weight " + ws.str() + " cannot be applied to input " + xs.str());
  }
  if (bias.valid()) {
    if (bias.tape != &t) throw std::invalid_argument("affine: bias lives on another tape");
    const Shape& bs = bias.shape();
    if (bs.size() != r || bs.rank == Rank::Matrix) {
      throw ShapeError("affine: bias " + bs.str() + " does not match output rows " + std::to_string(r));
    }
  }
  Tape::Node& n = bias.valid() ? t.push(Prim::Affine, out, {weight, input, bias})
                               : t.push(Prim::Affine, out, {weight, input});
  const auto& w = t.node(weight.id).val;
  const auto& x = t.node(input.id).val;
  for (std::size_t k = 0; k < batch; ++k) {
    const double* xk = x.data() + k * c;
    for (std::size_t i = 0; i < r; ++i) {
      const double* wi = w.data() + i * c;
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) s += wi[j] * xk[j];
      n.val[k * r + i] = s;
    }
  }
  if (bias.valid()) {
    const auto& b = t.node(bias.id).val;
    for (std::size_t k = 0; k < batch; ++k)
      for (std::size_t i = 0; i < r; ++i) n.val[k * r + i] += b[i];
  }
  return t.handle();
}

Var add(Var a, Var b) { return elementwise_binary(Prim::Add, a, b, false); }
Var sub(Var a, Var b) { return elementwise_binary(Prim::Sub, a, b, false); }
Var mul(Var a, Var b) { return elementwise_binary(Prim::Mul, a, b, false); }
Var div(Var a, Var b, bool guarded) { return elementwise_binary(Prim::Div, a, b, guarded); }

Var binary(Op op, Var a, Var b, bool guarded) {
  switch (op) {
    case Op::Add:
      return add(a, b);
    case Op::Sub:
      return sub(a, b);
    case Op::Mul:
      return mul(a, b);
    case Op::Div:
      return div(a, b, guarded);
    default:
      throw std::invalid_argument("binary: operator '" + std::string(op_name(op)) + "' is not binary");
  }
}

Var unary(Op op, Var x, bool guarded) {
  if (!is_unary(op)) {
    throw std::invalid_argument("unary: operator '" + std::string(op_name(op)) + "' is not unary");
  }
  Tape& t = tape_of(x);
  Tape::Node& n = t.push(Prim::Unary, x.shape(), {x});
  n.op = op;
  n.guarded = guarded;
  const auto& xv = t.node(x.id).val;
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = eval_unary(op, xv[i], guarded);
  return t.handle();
}

Var identity(Var x) { return unary(Op::Id, x, false); }
Var neg(Var x) { return unary(Op::Neg, x, false); }
Var sin(Var x) { return unary(Op::Sin, x, false); }
Var cos(Var x) { return unary(Op::Cos, x, false); }
Var tan(Var x, bool guarded) { return unary(Op::Tan, x, guarded); }
Var exp(Var x, bool guarded) { return unary(Op::Exp, x, guarded); }
Var log(Var x, bool guarded) { return unary(Op::Log, x, guarded); }
Var cosh(Var x, bool guarded) { return unary(Op::Cosh, x, guarded); }
Var square(Var x) { return unary(Op::Square, x, false); }

Var sum(Var x) {
  Tape& t = tape_of(x);
  Tape::Node& n = t.push(Prim::Sum, Shape::scalar(), {x});
  const auto& xv = t.node(x.id).val;
  n.val[0] = std::accumulate(xv.begin(), xv.end(), 0.0);
  return t.handle();
}

Var mean(Var x) {
  Tape& t = tape_of(x);
  Tape::Node& n = t.push(Prim::Mean, Shape::scalar(), {x});
  const auto& xv = t.node(x.id).val;
  n.val[0] = std::accumulate(xv.begin(), xv.end(), 0.0) / static_cast<double>(xv.size());
  return t.handle();
}

Var abs(Var x) {
  return elementwise_unary(Prim::Abs, x, [](double v) { return std::abs(v); });
}
Var sqrt(Var x) {
  return elementwise_unary(Prim::Sqrt, x, [](double v) { return std::sqrt(v); });
}
Var sigmoid(Var x) {
  return elementwise_unary(Prim::Sigmoid, x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}
Var tanh(Var x) {
  return elementwise_unary(Prim::Tanh, x, [](double v) { return std::tanh(v); });
}

Var pow(Var x, double exponent) {
  return elementwise_unary(Prim::Pow, x, [exponent](double v) { return std::pow(v, exponent); }, exponent);
}

Var scale(Var x, double factor) {
  return elementwise_unary(Prim::Scale, x, [factor](double v) { return v * factor; }, factor);
}

Var l05_star(Var x, double transition) {
  if (!(transition > 0.0)) throw std::invalid_argument("l05_star: transition point must be positive");
  return elementwise_unary(
      Prim::L05Star, x, [transition](double v) { return netsr::l05_star(v, transition); }, transition);
}

Var softmax(Var logits) {
  Tape& t = tape_of(logits);
  if (logits.shape().rank != Rank::Vector) throw ShapeError("softmax: expected vector, got " + logits.shape().str());
  Tape::Node& n = t.push(Prim::Softmax, logits.shape(), {logits});
  softmax_into(t.node(logits.id).val, n.val);
  return t.handle();
}

Var categorical_log_prob(Var logits, std::size_t index) {
  Tape& t = tape_of(logits);
  const Shape& s = logits.shape();
  if (s.rank != Rank::Vector) throw ShapeError("categorical_log_prob: expected vector, got " + s.str());
  if (index >= s.rows) {
    throw std::out_of_range("categorical_log_prob: index " + std::to_string(index) + " outside " + s.str());
  }
  Tape::Node& n = t.push(Prim::LogProb, Shape::scalar(), {logits});
  n.index = index;
  const auto& x = t.node(logits.id).val;
  n.val[0] = x[index] - log_sum_exp(x);
  return t.handle();
}

Var categorical_entropy(Var logits) {
  Tape& t = tape_of(logits);
  const Shape& s = logits.shape();
  if (s.rank != Rank::Vector) throw ShapeError("categorical_entropy: expected vector, got " + s.str());
  Tape::Node& n = t.push(Prim::Entropy, Shape::scalar(), {logits});
  const auto& x = t.node(logits.id).val;
  const double lse = log_sum_exp(x);
  double h = 0.0;
  for (double v : x) {
    const double lp = v - lse;
    h -= std::exp(lp) * lp;
  }
  n.val[0] = std::max(h, 0.0);
  return t.handle();
}

Var column(Var m, std::size_t j) {
  Tape& t = tape_of(m);
  const Shape s = m.shape();
  if (s.rank != Rank::Matrix) throw ShapeError("column: expected matrix, got " + s.str());
  if (j >= s.cols) throw ShapeError("column: index " + std::to_string(j) + " outside " + s.str());
  Tape::Node& n = t.push(Prim::Column, Shape::vector(s.rows), {m});
  n.index = j;
  const auto& mv = t.node(m.id).val;
  for (std::size_t k = 0; k < s.rows; ++k) n.val[k] = mv[k * s.cols + j];
  return t.handle();
}

Var stack_columns(std::span<const Var> columns) {
  if (columns.empty()) throw ShapeError("stack_columns: no columns");
  Tape& t = tape_of(columns[0]);
  const std::size_t rows = columns[0].shape().rows;
  for (const Var& c : columns) {
    if (c.tape != &t) throw std::invalid_argument("stack_columns: operands live on different tapes");
    if (c.shape().rank != Rank::Vector || c.shape().rows != rows) {
      throw ShapeError("stack_columns: column " + c.shape().str() + " does not match vector(" +
                       std::to_string(rows) + ")");
    }
  }
  const std::size_t cols = columns.size();
  Tape::Node& n = t.push(Prim::Stack, Shape::matrix(rows, cols), columns);
  for (std::size_t j = 0; j < cols; ++j) {
    const auto& cv = t.node(columns[j].id).val;
    for (std::size_t k = 0; k < rows; ++k) n.val[k * cols + j] = cv[k];
  }
  return t.handle();
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  Tape& t = tape_of(parts[0]);
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.tape != &t) throw std::invalid_argument("concat: operands live on different tapes");
    if (p.shape().rank == Rank::Matrix) throw ShapeError("concat: matrix operand " + p.shape().str());
    total += p.shape().size();
  }
  Tape::Node& n = t.push(Prim::Concat, Shape::vector(total), parts);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const auto& pv = t.node(p.id).val;
    std::copy(pv.begin(), pv.end(), n.val.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += pv.size();
  }
  return t.handle();
}

Var pad(Var x, std::size_t size) {
  Tape& t = tape_of(x);
  const Shape s = x.shape();
  if (s.rank == Rank::Matrix || s.size() > size) {
    throw ShapeError("pad: cannot pad " + s.str() + " to vector(" + std::to_string(size) + ")");
  }
  Tape::Node& n = t.push(Prim::Pad, Shape::vector(size), {x});
  const auto& xv = t.node(x.id).val;
  std::fill(n.val.begin(), n.val.end(), 0.0);
  std::copy(xv.begin(), xv.end(), n.val.begin());
  return t.handle();
}

}  // namespace netsr::ad
