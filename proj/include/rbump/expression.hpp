#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rbump {

/// Parsed arithmetic expression over a fixed list of named variables.
///
/// Grammar: numbers, variables, "pi", operators + - * / ^ (right-assoc),
/// unary minus, parentheses, and the functions exp, log, sqrt, sin, cos.
/// Evaluation is plain double or forward-mode (value + gradient in all
/// variables), which is what the curvature families use for analytic
/// derivatives.
class Expression {
public:
  Expression() = default;

  static Expression parse(const std::string& text,
                          std::vector<std::string> variables);

  double eval(std::span<const double> values) const;

  /// Value plus d/dx_i for every variable (forward mode, exact to roundoff).
  double eval_with_gradient(std::span<const double> values,
                            std::span<double> gradient) const;

  std::size_t variable_count() const { return variables_.size(); }
  const std::string& source() const { return source_; }
  bool empty() const { return root_ == nullptr; }

  struct Node;

private:
  std::shared_ptr<const Node> root_;
  std::vector<std::string> variables_;
  std::string source_;
};

/// Thrown on malformed expression text or arity/variable errors.
struct ExpressionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rbump
