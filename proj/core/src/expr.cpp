#include "netsr/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <nlohmann/json.hpp>

#include "netsr/symnet.hpp"

namespace netsr {

// ---------------------------------------------------------------------------
// Construction

Expression::Expression() : node_(std::make_shared<const Node>()) {}

Expression Expression::variable(std::size_t index) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Variable;
  n->index = index;
  return Expression(std::move(n));
}

Expression Expression::constant(double value) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Constant;
  n->value = value;
  return Expression(std::move(n));
}

Expression Expression::unary(Op op, Expression child) {
  if (!is_unary(op)) throw std::invalid_argument("Expression::unary: '" + std::string(op_name(op)) + "' is binary");
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Unary;
  n->op = op;
  n->children.push_back(std::move(child));
  return Expression(std::move(n));
}

Expression Expression::binary(Op op, Expression left, Expression right) {
  if (!is_binary(op)) throw std::invalid_argument("Expression::binary: '" + std::string(op_name(op)) + "' is unary");
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Binary;
  n->op = op;
  n->children.push_back(std::move(left));
  n->children.push_back(std::move(right));
  return Expression(std::move(n));
}

std::size_t Expression::child_count() const { return node_->children.size(); }

bool operator==(const Expression& a, const Expression& b) {
  if (a.node_ == b.node_) return true;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case NodeKind::Variable:
      return a.variable_index() == b.variable_index();
    case NodeKind::Constant:
      return a.value() == b.value();
    case NodeKind::Unary:
      return a.op() == b.op() && a.child(0) == b.child(0);
    case NodeKind::Binary:
      return a.op() == b.op() && a.child(0) == b.child(0) && a.child(1) == b.child(1);
  }
  return false;
}

// ---------------------------------------------------------------------------
// Evaluation and metrics

namespace {

void evaluate_into(const Expression& e, const Matrix& x, bool guarded, std::vector<double>& out) {
  const std::size_t n = x.rows;
  out.resize(n);
  switch (e.kind()) {
    case NodeKind::Variable: {
      const std::size_t j = e.variable_index();
      if (j >= x.cols) {
        throw std::out_of_range("evaluate: variable x" + std::to_string(j + 1) + " but data has " +
                                std::to_string(x.cols) + " columns");
      }
      for (std::size_t k = 0; k < n; ++k) out[k] = x(k, j);
      return;
    }
    case NodeKind::Constant:
      std::fill(out.begin(), out.end(), e.value());
      return;
    case NodeKind::Unary:
      evaluate_into(e.child(0), x, guarded, out);
      for (double& v : out) v = eval_unary(e.op(), v, guarded);
      return;
    case NodeKind::Binary: {
      std::vector<double> rhs;
      evaluate_into(e.child(0), x, guarded, out);
      evaluate_into(e.child(1), x, guarded, rhs);
      for (std::size_t k = 0; k < n; ++k) out[k] = eval_binary(e.op(), out[k], rhs[k], guarded);
      return;
    }
  }
}

}  // namespace

std::vector<double> evaluate(const Expression& e, const Matrix& x, bool guarded) {
  std::vector<double> out;
  evaluate_into(e, x, guarded, out);
  return out;
}

double evaluate_point(const Expression& e, std::span<const double> x, bool guarded) {
  switch (e.kind()) {
    case NodeKind::Variable:
      if (e.variable_index() >= x.size()) throw std::out_of_range("evaluate_point: variable index out of range");
      return x[e.variable_index()];
    case NodeKind::Constant:
      return e.value();
    case NodeKind::Unary:
      return eval_unary(e.op(), evaluate_point(e.child(0), x, guarded), guarded);
    case NodeKind::Binary:
      return eval_binary(e.op(), evaluate_point(e.child(0), x, guarded), evaluate_point(e.child(1), x, guarded),
                         guarded);
  }
  return std::nan("");
}

std::size_t variable_count(const Expression& e) {
  if (e.kind() == NodeKind::Variable) return e.variable_index() + 1;
  std::size_t m = 0;
  for (std::size_t i = 0; i < e.child_count(); ++i) m = std::max(m, variable_count(e.child(i)));
  return m;
}

std::size_t complexity(const Expression& e) {
  std::size_t n = 1;
  for (std::size_t i = 0; i < e.child_count(); ++i) n += complexity(e.child(i));
  return n;
}

std::size_t depth(const Expression& e) {
  std::size_t d = 0;
  for (std::size_t i = 0; i < e.child_count(); ++i) d = std::max(d, depth(e.child(i)));
  return d + 1;
}

// ---------------------------------------------------------------------------
// Simplification

namespace {

Expression cst(double v) { return Expression::constant(v); }
Expression mul(Expression a, Expression b) { return Expression::binary(Op::Mul, std::move(a), std::move(b)); }
Expression add(Expression a, Expression b) { return Expression::binary(Op::Add, std::move(a), std::move(b)); }
Expression sub(Expression a, Expression b) { return Expression::binary(Op::Sub, std::move(a), std::move(b)); }
Expression neg(Expression a) { return Expression::unary(Op::Neg, std::move(a)); }

// Folds only where the guarded and unguarded semantics agree on a finite
// value, so folding never changes either evaluation mode.
std::optional<double> fold_value(const Expression& e) {
  double guarded = 0.0, raw = 0.0;
  if (e.kind() == NodeKind::Unary) {
    guarded = eval_unary(e.op(), e.child(0).value(), true);
    raw = eval_unary(e.op(), e.child(0).value(), false);
  } else {
    guarded = eval_binary(e.op(), e.child(0).value(), e.child(1).value(), true);
    raw = eval_binary(e.op(), e.child(0).value(), e.child(1).value(), false);
  }
  if (std::isfinite(raw) && raw == guarded) return raw;
  return std::nullopt;
}

struct Term {
  double coef;
  Expression base;
};

void add_term(std::vector<Term>& terms, double coef, const Expression& base) {
  for (Term& t : terms) {
    if (t.base == base) {
      t.coef += coef;
      return;
    }
  }
  terms.push_back({coef, base});
}

void collect_terms(const Expression& e, double sign, std::vector<Term>& terms, double& constant) {
  if (e.is_constant()) {
    constant += sign * e.value();
    return;
  }
  if (e.kind() == NodeKind::Binary && (e.op() == Op::Add || e.op() == Op::Sub)) {
    collect_terms(e.child(0), sign, terms, constant);
    collect_terms(e.child(1), e.op() == Op::Add ? sign : -sign, terms, constant);
    return;
  }
  if (e.kind() == NodeKind::Unary && e.op() == Op::Neg) {
    collect_terms(e.child(0), -sign, terms, constant);
    return;
  }
  if (e.kind() == NodeKind::Binary && e.op() == Op::Mul && e.child(0).is_constant()) {
    add_term(terms, sign * e.child(0).value(), e.child(1));
    return;
  }
  add_term(terms, sign, e);
}

Expression scaled(double coef, const Expression& base) {
  if (coef == 1.0) return base;
  return mul(cst(coef), base);
}

Expression build_sum(std::vector<Term> terms, double constant) {
  std::erase_if(terms, [](const Term& t) { return t.coef == 0.0; });
  if (terms.empty()) return cst(constant);
  // Lead with a positive term when possible so no negation is needed.
  auto lead = std::find_if(terms.begin(), terms.end(), [](const Term& t) { return t.coef > 0.0; });
  Expression out;
  bool constant_used = false;
  if (lead != terms.end()) {
    out = scaled(lead->coef, lead->base);
    terms.erase(lead);
  } else if (constant != 0.0) {
    out = cst(constant);
    constant_used = true;
  } else {
    out = terms.front().coef == -1.0 ? neg(terms.front().base) : mul(cst(terms.front().coef), terms.front().base);
    terms.erase(terms.begin());
  }
  for (const Term& t : terms) {
    out = t.coef > 0.0 ? add(out, scaled(t.coef, t.base)) : sub(out, scaled(-t.coef, t.base));
  }
  if (!constant_used && constant != 0.0) out = constant > 0.0 ? add(out, cst(constant)) : sub(out, cst(-constant));
  return out;
}

void collect_factors(const Expression& e, double& coef, std::vector<Expression>& factors) {
  if (e.is_constant()) {
    coef *= e.value();
  } else if (e.kind() == NodeKind::Binary && e.op() == Op::Mul) {
    collect_factors(e.child(0), coef, factors);
    collect_factors(e.child(1), coef, factors);
  } else if (e.kind() == NodeKind::Unary && e.op() == Op::Neg) {
    coef = -coef;
    collect_factors(e.child(0), coef, factors);
  } else {
    factors.push_back(e);
  }
}

Expression build_product(double coef, std::vector<Expression> factors) {
  if (coef == 0.0 || factors.empty()) return cst(coef);
  std::vector<Expression> merged;
  std::vector<bool> used(factors.size(), false);
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (used[i]) continue;
    std::size_t j = i + 1;
    while (j < factors.size() && (used[j] || !(factors[j] == factors[i]))) ++j;
    if (j < factors.size()) {
      used[j] = true;
      merged.push_back(Expression::unary(Op::Square, factors[i]));
    } else {
      merged.push_back(factors[i]);
    }
  }
  Expression prod = merged.front();
  for (std::size_t i = 1; i < merged.size(); ++i) prod = mul(prod, merged[i]);
  if (coef == 1.0) return prod;
  if (coef == -1.0) return neg(prod);
  return mul(cst(coef), prod);
}

Expression rebuild(const Expression& e, std::vector<Expression> kids) {
  if (e.kind() == NodeKind::Unary) return Expression::unary(e.op(), std::move(kids[0]));
  return Expression::binary(e.op(), std::move(kids[0]), std::move(kids[1]));
}

Expression simplify_node(const Expression& e) {
  if (e.kind() == NodeKind::Variable || e.kind() == NodeKind::Constant) return e;

  std::vector<Expression> kids;
  for (std::size_t i = 0; i < e.child_count(); ++i) kids.push_back(simplify_node(e.child(i)));
  const Expression base = rebuild(e, kids);

  if (std::all_of(kids.begin(), kids.end(), [](const Expression& k) { return k.is_constant(); })) {
    if (auto v = fold_value(base)) return cst(*v);
    return base;
  }

  Expression out = base;
  if (e.kind() == NodeKind::Unary) {
    const Expression& c = kids[0];
    switch (e.op()) {
      case Op::Id:
        out = c;
        break;
      case Op::Neg:
        if (c.kind() == NodeKind::Unary && c.op() == Op::Neg) {
          out = c.child(0);
        } else if (c.kind() == NodeKind::Binary && c.op() == Op::Mul && c.child(0).is_constant()) {
          out = scaled(-c.child(0).value(), c.child(1));
        }
        break;
      case Op::Square:
        if (c.kind() == NodeKind::Unary && c.op() == Op::Neg) out = Expression::unary(Op::Square, c.child(0));
        break;
      default:
        break;
    }
  } else {
    switch (e.op()) {
      case Op::Add:
      case Op::Sub: {
        std::vector<Term> terms;
        double constant = 0.0;
        collect_terms(base, 1.0, terms, constant);
        out = build_sum(std::move(terms), constant);
        break;
      }
      case Op::Mul: {
        double coef = 1.0;
        std::vector<Expression> factors;
        collect_factors(base, coef, factors);
        out = build_product(coef, std::move(factors));
        break;
      }
      case Op::Div:
        if (kids[1].is_constant(1.0)) out = kids[0];
        else if (kids[0].is_constant(0.0)) out = cst(0.0);
        break;
      default:
        break;
    }
  }
  // Never trade a rewrite for a larger tree.
  return complexity(out) <= complexity(base) ? out : base;
}

}  // namespace

Expression simplify(const Expression& e) {
  Expression cur = e;
  const std::size_t passes = depth(e) + 1;
  for (std::size_t i = 0; i < passes; ++i) {
    Expression next = simplify_node(cur);
    if (next == cur) break;
    cur = std::move(next);
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Extraction

namespace {

Expression affine_expression(const Matrix& w, std::size_t row, const std::vector<Expression>& inputs,
                             const std::vector<std::vector<double>>& biases, std::size_t layer) {
  std::optional<Expression> sum;
  for (std::size_t j = 0; j < w.cols; ++j) {
    const double coef = w(row, j);
    if (coef == 0.0 || inputs[j].is_constant(0.0)) continue;
    Expression term = coef == 1.0 ? inputs[j] : mul(cst(coef), inputs[j]);
    sum = sum ? add(*sum, term) : term;
  }
  if (!biases.empty() && biases[layer][row] != 0.0) {
    sum = sum ? add(*sum, cst(biases[layer][row])) : cst(biases[layer][row]);
  }
  return sum ? *sum : cst(0.0);
}

}  // namespace

Expression extract(const SymbolicNetwork& net) {
  std::vector<Expression> h;
  for (std::size_t j = 0; j < net.input_dim; ++j) h.push_back(Expression::variable(j));
  const std::size_t layers = net.descriptor.layers.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const LayerLayout lay = layout_of(net.descriptor.layers[l]);
    const Matrix& w = net.weights[l];
    std::vector<Expression> z;
    for (std::size_t i = 0; i < w.rows; ++i) z.push_back(affine_expression(w, i, h, net.biases, l));
    std::vector<Expression> next;
    const std::size_t u = lay.unary.size();
    for (std::size_t i = 0; i < u; ++i) next.push_back(Expression::unary(lay.unary[i], z[i]));
    for (std::size_t j = 0; j < lay.binary.size(); ++j) {
      next.push_back(Expression::binary(lay.binary[j], z[u + 2 * j], z[u + 2 * j + 1]));
    }
    h = std::move(next);
  }
  return simplify(affine_expression(net.weights[layers], 0, h, net.biases, layers));
}

// ---------------------------------------------------------------------------
// Constant slots

namespace {

void collect_constants(const Expression& e, std::vector<double>& out) {
  if (e.is_constant()) out.push_back(e.value());
  for (std::size_t i = 0; i < e.child_count(); ++i) collect_constants(e.child(i), out);
}

Expression replace_constants(const Expression& e, std::span<const double> values, std::size_t& next) {
  switch (e.kind()) {
    case NodeKind::Constant:
      return cst(values[next++]);
    case NodeKind::Variable:
      return e;
    case NodeKind::Unary:
      return Expression::unary(e.op(), replace_constants(e.child(0), values, next));
    case NodeKind::Binary: {
      Expression l = replace_constants(e.child(0), values, next);
      Expression r = replace_constants(e.child(1), values, next);
      return Expression::binary(e.op(), std::move(l), std::move(r));
    }
  }
  return e;
}

}  // namespace

std::vector<double> constants(const Expression& e) {
  std::vector<double> out;
  collect_constants(e, out);
  return out;
}

Expression with_constants(const Expression& e, std::span<const double> values) {
  const std::size_t expected = constants(e).size();
  if (values.size() != expected) {
    throw std::invalid_argument("with_constants: expected " + std::to_string(expected) + " values, got " +
                                std::to_string(values.size()));
  }
  std::size_t next = 0;
  return replace_constants(e, values, next);
}

// ---------------------------------------------------------------------------
// Printing

namespace {

constexpr int kPrecSum = 1;
constexpr int kPrecProduct = 2;
constexpr int kPrecPrefix = 3;
constexpr int kPrecPower = 4;
constexpr int kPrecAtom = 5;

int precedence(const Expression& e) {
  switch (e.kind()) {
    case NodeKind::Variable:
      return kPrecAtom;
    case NodeKind::Constant:
      return std::signbit(e.value()) ? kPrecPrefix : kPrecAtom;
    case NodeKind::Unary:
      if (e.op() == Op::Neg) return kPrecPrefix;
      if (e.op() == Op::Square) return kPrecPower;
      if (e.op() == Op::Id) return precedence(e.child(0));
      return kPrecAtom;
    case NodeKind::Binary:
      return (e.op() == Op::Add || e.op() == Op::Sub) ? kPrecSum : kPrecProduct;
  }
  return kPrecAtom;
}

std::string format_number(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

void render(const Expression& e, const FormatOptions& opt, std::string& out);

void render_wrapped(const Expression& e, bool wrap, const FormatOptions& opt, std::string& out) {
  if (wrap) out += '(';
  render(e, opt, out);
  if (wrap) out += ')';
}

void render(const Expression& e, const FormatOptions& opt, std::string& out) {
  switch (e.kind()) {
    case NodeKind::Variable:
      out += 'x';
      out += std::to_string(e.variable_index() + 1);
      return;
    case NodeKind::Constant:
      out += format_number(e.value(), opt.digits);
      return;
    case NodeKind::Unary: {
      const Expression& c = e.child(0);
      switch (e.op()) {
        case Op::Id:
          render(c, opt, out);
          return;
        case Op::Neg:
          out += '-';
          render_wrapped(c, precedence(c) < kPrecPrefix, opt, out);
          return;
        case Op::Square:
          render_wrapped(c, precedence(c) < kPrecAtom, opt, out);
          out += "^2";
          return;
        default:
          out += op_name(e.op());
          out += '(';
          render(c, opt, out);
          out += ')';
          return;
      }
    }
    case NodeKind::Binary: {
      const int p = precedence(e);
      const Expression& l = e.child(0);
      const Expression& r = e.child(1);
      render_wrapped(l, precedence(l) < p, opt, out);
      switch (e.op()) {
        case Op::Add:
          out += " + ";
          break;
        case Op::Sub:
          out += " - ";
          break;
        case Op::Mul:
          out += '*';
          break;
        default:
          out += '/';
          break;
      }
      render_wrapped(r, precedence(r) <= p, opt, out);
      return;
    }
  }
}

}  // namespace

std::string to_string(const Expression& e, FormatOptions options) {
  std::string out;
  render(e, options, out);
  return out;
}

nlohmann::json to_json(const Expression& e) {
  switch (e.kind()) {
    case NodeKind::Variable:
      return {{"type", "var"}, {"index", e.variable_index()}};
    case NodeKind::Constant:
      return {{"type", "const"}, {"value", e.value()}};
    case NodeKind::Unary:
      return {{"type", std::string(op_name(e.op()))}, {"children", {to_json(e.child(0))}}};
    case NodeKind::Binary:
      return {{"type", std::string(op_name(e.op()))}, {"children", {to_json(e.child(0)), to_json(e.child(1))}}};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Parsing

ParseError::ParseError(const std::string& message, std::size_t position)
    : std::runtime_error(message + " at position " + std::to_string(position)), position_(position) {}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expression parse_all() {
    Expression e = parse_sum();
    skip_space();
    if (pos_ != text_.size()) throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    return e;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError(std::string("expected '") + c + "' but input ended", pos_);
    if (text_[pos_] != c) throw ParseError(std::string("expected '") + c + "'", pos_);
    ++pos_;
  }

  Expression parse_sum() {
    Expression e = parse_product();
    for (;;) {
      if (accept('+')) {
        e = add(e, parse_product());
      } else if (accept('-')) {
        e = sub(e, parse_product());
      } else {
        return e;
      }
    }
  }

  Expression parse_product() {
    Expression e = parse_prefix();
    for (;;) {
      if (accept('*')) {
        e = mul(e, parse_prefix());
      } else if (accept('/')) {
        e = Expression::binary(Op::Div, e, parse_prefix());
      } else {
        return e;
      }
    }
  }

  Expression parse_prefix() {
    if (accept('-')) {
      Expression inner = parse_prefix();
      if (inner.is_constant()) return cst(-inner.value());
      return neg(inner);
    }
    if (accept('+')) return parse_prefix();
    return parse_power();
  }

  Expression parse_power() {
    Expression base = parse_atom();
    skip_space();
    const std::size_t at = pos_;
    if (accept('^')) return make_power(base, parse_prefix(), at);
    return base;
  }

  static Expression make_power(const Expression& base, const Expression& exponent, std::size_t at) {
    if (variable_count(exponent) == 0) {
      const double p = evaluate_point(exponent, {}, false);
      if (!std::isfinite(p)) throw ParseError("exponent is not finite", at);
      if (p == std::round(p) && std::abs(p) <= 9.0) {
        const int n = static_cast<int>(std::abs(p));
        Expression out = cst(1.0);
        if (n == 1) {
          out = base;
        } else if (n == 2) {
          out = Expression::unary(Op::Square, base);
        } else if (n >= 3) {
          out = base;
          for (int i = 1; i < n; ++i) out = mul(out, base);
        }
        return p < 0 ? Expression::binary(Op::Div, cst(1.0), out) : out;
      }
      return Expression::unary(Op::Exp, mul(cst(p), Expression::unary(Op::Log, base)));
    }
    return Expression::unary(Op::Exp, mul(exponent, Expression::unary(Op::Log, base)));
  }

  Expression parse_atom() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expression e = parse_sum();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  Expression parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        digits();
      } else {
        pos_ = save;
      }
    }
    const std::string token(text_.substr(start, pos_ - start));
    if (token == ".") throw ParseError("malformed number", start);
    return cst(std::stod(token));
  }

  Expression parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name(text_.substr(start, pos_ - start));
    if (name == "pi") return cst(std::numbers::pi);
    if (name.size() > 1 && name[0] == 'x' &&
        std::all_of(name.begin() + 1, name.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      const unsigned long idx = std::stoul(name.substr(1));
      if (idx == 0) throw ParseError("variables are numbered from x1", start);
      return Expression::variable(idx - 1);
    }
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != '(') {
      throw ParseError("unknown identifier '" + name + "'", start);
    }
    ++pos_;
    Expression arg = parse_sum();
    expect(')');
    if (name == "ln") return Expression::unary(Op::Log, arg);
    if (name == "sqrt") return make_power(arg, cst(0.5), start);
    if (name == "sinh") {
      return mul(cst(0.5), sub(Expression::unary(Op::Exp, arg), Expression::unary(Op::Exp, neg(arg))));
    }
    static constexpr std::string_view kFunctions[] = {"sin", "cos", "tan", "exp", "log", "cosh"};
    for (auto f : kFunctions) {
      if (name == f) return Expression::unary(*op_from_name(f), arg);
    }
    throw ParseError("unknown function '" + name + "'", start);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression parse(std::string_view text) { return Parser(text).parse_all(); }

// ---------------------------------------------------------------------------
// Tape recording

namespace {

ad::Var record(const Expression& e, std::span<const ad::Var> constants, std::span<const ad::Var> columns,
               bool guarded, std::size_t& next) {
  switch (e.kind()) {
    case NodeKind::Variable:
      if (e.variable_index() >= columns.size()) throw std::out_of_range("to_tape: variable index out of range");
      return columns[e.variable_index()];
    case NodeKind::Constant:
      if (next >= constants.size()) throw std::out_of_range("to_tape: not enough constant leaves");
      return constants[next++];
    case NodeKind::Unary:
      return ad::unary(e.op(), record(e.child(0), constants, columns, guarded, next), guarded);
    case NodeKind::Binary: {
      ad::Var l = record(e.child(0), constants, columns, guarded, next);
      ad::Var r = record(e.child(1), constants, columns, guarded, next);
      return ad::binary(e.op(), l, r, guarded);
    }
  }
  throw std::logic_error("to_tape: unknown node kind");
}

}  // namespace

ad::Var to_tape(const Expression& e, std::span<const ad::Var> constant_leaves, std::span<const ad::Var> columns,
                bool guarded) {
  std::size_t next = 0;
  return record(e, constant_leaves, columns, guarded, next);
}

}  // namespace netsr
