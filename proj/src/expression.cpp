#include "rbump/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace rbump {

namespace {

enum class Op { Add, Sub, Mul, Div, Pow, Neg, Exp, Log, Sqrt, Sin, Cos, Abs, Num, Var };

// Value/derivative pair for forward-mode evaluation. The gradient slot is
// shared storage owned by the caller; scalar evaluation passes none.
struct Dual {
  double v = 0.0;
  std::vector<double> g;

  explicit Dual(std::size_t nvars) : g(nvars, 0.0) {}
};

}  // namespace

struct Expression::Node {
  Op op;
  double number = 0.0;
  int var = -1;
  std::shared_ptr<const Node> lhs, rhs;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

NodePtr make(Op op, NodePtr l = nullptr, NodePtr r = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->lhs = std::move(l);
  n->rhs = std::move(r);
  return n;
}

class Parser {
public:
  Parser(const std::string& text, const std::vector<std::string>& vars)
      : text_(text), vars_(vars) {}

  NodePtr run() {
    NodePtr e = expr();
    skip_ws();
    if (pos_ != text_.size())
      throw ExpressionError("trailing characters at position " +
                            std::to_string(pos_) + " in '" + text_ + "'");
    return e;
  }

private:
  const std::string& text_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  NodePtr expr() {
    NodePtr e = term();
    for (;;) {
      if (eat('+'))
        e = make(Op::Add, e, term());
      else if (eat('-'))
        e = make(Op::Sub, e, term());
      else
        return e;
    }
  }

  NodePtr term() {
    NodePtr e = unary();
    for (;;) {
      if (eat('*'))
        e = make(Op::Mul, e, unary());
      else if (eat('/'))
        e = make(Op::Div, e, unary());
      else
        return e;
    }
  }

  NodePtr unary() {
    if (eat('-')) return make(Op::Neg, unary());
    if (eat('+')) return unary();
    return power();
  }

  // Right-associative: a^b^c = a^(b^c). Exponent binds a following unary
  // minus, so 2^-1 parses.
  NodePtr power() {
    NodePtr base = primary();
    if (eat('^')) return make(Op::Pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= text_.size()) throw ExpressionError("unexpected end of expression: '" + text_ + "'");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      if (!eat(')')) throw ExpressionError("missing ')' in '" + text_ + "'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    throw ExpressionError(std::string("unexpected character '") + c + "' in '" + text_ + "'");
  }

  NodePtr number() {
    const char* begin = text_.c_str() + pos_;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) throw ExpressionError("bad number in '" + text_ + "'");
    pos_ += static_cast<std::size_t>(end - begin);
    auto n = std::make_shared<Expression::Node>();
    n->op = Op::Num;
    n->number = v;
    return n;
  }

  NodePtr identifier() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    std::string name = text_.substr(start, pos_ - start);

    if (peek() == '(') {
      Op op;
      if (name == "exp")
        op = Op::Exp;
      else if (name == "log")
        op = Op::Log;
      else if (name == "sqrt")
        op = Op::Sqrt;
      else if (name == "sin")
        op = Op::Sin;
      else if (name == "cos")
        op = Op::Cos;
      else if (name == "abs")
        op = Op::Abs;
      else
        throw ExpressionError("unknown function '" + name + "'");
      eat('(');
      NodePtr arg = expr();
      if (!eat(')')) throw ExpressionError("missing ')' after " + name);
      return make(op, arg);
    }

    if (name == "pi") {
      auto n = std::make_shared<Expression::Node>();
      n->op = Op::Num;
      n->number = M_PI;
      return n;
    }
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i] == name) {
        auto n = std::make_shared<Expression::Node>();
        n->op = Op::Var;
        n->var = static_cast<int>(i);
        return n;
      }
    }
    throw ExpressionError("unknown variable '" + name + "' in '" + text_ + "'");
  }
};

double eval_scalar(const Expression::Node& n, std::span<const double> x) {
  switch (n.op) {
    case Op::Num: return n.number;
    case Op::Var: return x[static_cast<std::size_t>(n.var)];
    case Op::Add: return eval_scalar(*n.lhs, x) + eval_scalar(*n.rhs, x);
    case Op::Sub: return eval_scalar(*n.lhs, x) - eval_scalar(*n.rhs, x);
    case Op::Mul: return eval_scalar(*n.lhs, x) * eval_scalar(*n.rhs, x);
    case Op::Div: return eval_scalar(*n.lhs, x) / eval_scalar(*n.rhs, x);
    case Op::Pow: return std::pow(eval_scalar(*n.lhs, x), eval_scalar(*n.rhs, x));
    case Op::Neg: return -eval_scalar(*n.lhs, x);
    case Op::Exp: return std::exp(eval_scalar(*n.lhs, x));
    case Op::Log: return std::log(eval_scalar(*n.lhs, x));
    case Op::Sqrt: return std::sqrt(eval_scalar(*n.lhs, x));
    case Op::Sin: return std::sin(eval_scalar(*n.lhs, x));
    case Op::Cos: return std::cos(eval_scalar(*n.lhs, x));
    case Op::Abs: return std::abs(eval_scalar(*n.lhs, x));
  }
  throw ExpressionError("corrupt expression node");
}

Dual eval_dual(const Expression::Node& n, std::span<const double> x) {
  const std::size_t nv = x.size();
  Dual out(nv);
  switch (n.op) {
    case Op::Num:
      out.v = n.number;
      return out;
    case Op::Var:
      out.v = x[static_cast<std::size_t>(n.var)];
      out.g[static_cast<std::size_t>(n.var)] = 1.0;
      return out;
    default: break;
  }

  Dual a = eval_dual(*n.lhs, x);
  switch (n.op) {
    case Op::Neg:
      out.v = -a.v;
      for (std::size_t i = 0; i < nv; ++i) out.g[i] = -a.g[i];
      return out;
    case Op::Exp: {
      out.v = std::exp(a.v);
      for (std::size_t i = 0; i < nv; ++i) out.g[i] = out.v * a.g[i];
      return out;
    }
    case Op::Log: {
      out.v = std::log(a.v);
      for (std::size_t i = 0; i < nv; ++i) out.g[i] = a.g[i] / a.v;
      return out;
    }
    case Op::Sqrt: {
      out.v = std::sqrt(a.v);
      for (std::size_t i = 0; i < nv; ++i) out.g[i] = 0.5 * a.g[i] / out.v;
      return out;
    }
    case Op::Sin: {
      out.v = std::sin(a.v);
      double c = std::cos(a.v);
      for (std::size_t i = 0; i < nv; ++i) out.g[i] = c * a.g[i];
      return out;
    }
    case Op::Cos: {
      out.v = std::cos(a.v);
      double s = -std::sin(a.v);
      for (std::size_t i = 0; i < nv; ++i) out.g[i] = s * a.g[i];
      return out;
    }
    case Op::Abs: {
      out.v = std::abs(a.v);
      double sign = a.v > 0.0 ? 1.0 : (a.v < 0.0 ? -1.0 : 0.0);
      for (std::size_t i = 0; i < nv; ++i) out.g[i] = sign * a.g[i];
      return out;
    }
    default: break;
  }

  Dual b = eval_dual(*n.rhs, x);
  switch (n.op) {
    case Op::Add:
      out.v = a.v + b.v;
      for (std::size_t i = 0; i < nv; ++i) out.g[i] = a.g[i] + b.g[i];
      return out;
    case Op::Sub:
      out.v = a.v - b.v;
      for (std::size_t i = 0; i < nv; ++i) out.g[i] = a.g[i] - b.g[i];
      return out;
    case Op::Mul:
      out.v = a.v * b.v;
      for (std::size_t i = 0; i < nv; ++i) out.g[i] = a.g[i] * b.v + a.v * b.g[i];
      return out;
    case Op::Div:
      out.v = a.v / b.v;
      for (std::size_t i = 0; i < nv; ++i) out.g[i] = (a.g[i] - out.v * b.g[i]) / b.v;
      return out;
    case Op::Pow: {
      out.v = std::pow(a.v, b.v);
      // d(a^b) = a^b (b'/1 ln a + b a'/a); the ln branch only fires when the
      // exponent actually varies, so integer powers of negative bases work.
      bool b_varies = false;
      for (std::size_t i = 0; i < nv; ++i) b_varies = b_varies || b.g[i] != 0.0;
      for (std::size_t i = 0; i < nv; ++i) {
        double d = b.v * std::pow(a.v, b.v - 1.0) * a.g[i];
        if (b_varies && b.g[i] != 0.0) d += out.v * std::log(a.v) * b.g[i];
        out.g[i] = d;
      }
      return out;
    }
    default: break;
  }
  throw ExpressionError("corrupt expression node");
}

}  // namespace

Expression Expression::parse(const std::string& text, std::vector<std::string> variables) {
  Expression e;
  e.variables_ = std::move(variables);
  e.source_ = text;
  Parser p(text, e.variables_);
  e.root_ = p.run();
  return e;
}

double Expression::eval(std::span<const double> values) const {
  if (!root_) throw ExpressionError("evaluating empty expression");
  if (values.size() != variables_.size())
    throw ExpressionError("expression expects " + std::to_string(variables_.size()) +
                          " values, got " + std::to_string(values.size()));
  return eval_scalar(*root_, values);
}

double Expression::eval_with_gradient(std::span<const double> values,
                                      std::span<double> gradient) const {
  if (!root_) throw ExpressionError("evaluating empty expression");
  if (values.size() != variables_.size() || gradient.size() != variables_.size())
    throw ExpressionError("gradient evaluation size mismatch");
  Dual d = eval_dual(*root_, values);
  for (std::size_t i = 0; i < values.size(); ++i) gradient[i] = d.g[i];
  return d.v;
}

}  // namespace rbump
