#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <variant>

#include "rbump/expression.hpp"
#include "rbump/geometry.hpp"

namespace rbump {

struct CurvatureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConstantCurvature {
  double c = 1.0;
};

/// H(X) = c |X|^-gamma.
struct RadialPowerCurvature {
  double c = 1.0;
  double gamma = 1.0;
};

/// H(rho q) = f(rho) * g(q); f over the variable rho, g over the ambient
/// coordinates q1..q_{n+1} of the unit vector q.
struct SeparableCurvature {
  Expression f;
  Expression g;
};

/// Caller-supplied H(X); the gradient callable may be empty, in which case
/// finite differences are used where a gradient is required.
struct TabulatedCurvature {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
};

enum class HypothesisMode { Weak, Strict };

/// The prescribed mean curvature on the annular cone A = {rho q, r1<=rho<=r2},
/// eps-regularized as |X|^-eps H(X) and extended to the whole cone over the
/// domain by the C^1 radial-affine continuation
///   H(rho q) = (r1/rho) H(r1 q) + (1 - r1/rho) h1(q)  for rho < r1
/// (and symmetrically past r2), with h1, h2 the values of d/drho[rho H(rho q)]
/// at r1, r2 computed for the regularized H.
class CurvatureSpec {
public:
  using Base = std::variant<ConstantCurvature, RadialPowerCurvature, SeparableCurvature,
                            TabulatedCurvature>;

  CurvatureSpec(Base base, double r1, double r2, double epsilon = 0.0);

  static CurvatureSpec constant(double c, double r1, double r2, double epsilon = 0.0);
  static CurvatureSpec radial_power(double c, double gamma, double r1, double r2,
                                    double epsilon = 0.0);
  static CurvatureSpec separable(Expression f, Expression g, double r1, double r2,
                                 double epsilon = 0.0);
  static CurvatureSpec tabulated(std::function<double(const Eigen::VectorXd&)> value,
                                 std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient,
                                 double r1, double r2, double epsilon = 0.0);

  double r1() const { return r1_; }
  double r2() const { return r2_; }
  double epsilon() const { return eps_; }
  const Base& base() const { return base_; }
  bool is_tabulated() const { return std::holds_alternative<TabulatedCurvature>(base_); }

  /// Extended regularized H at X = rho q, q a unit vector, rho > 0.
  double evaluate(const Eigen::VectorXd& q, double rho) const;
  double evaluate_point(const Eigen::VectorXd& X) const;

  /// dH/drho of the extended H at fixed direction q.
  double radial_partial(const Eigen::VectorXd& q, double rho) const;

  /// d/drho [rho H(rho q)] of the extended H. Analytic for closed-form
  /// families, centered differences (step 1e-6 rho) for tabulated data.
  double radial_derivative(const Eigen::VectorXd& q, double rho) const;

  /// Ambient gradient of the regularized H; valid for rho in [r1, r2].
  Eigen::VectorXd ambient_gradient(const Eigen::VectorXd& q, double rho) const;

  /// Extension slopes h1(q), h2(q).
  double h1(const Eigen::VectorXd& q) const;
  double h2(const Eigen::VectorXd& q) const;

private:
  double base_eval(const Eigen::VectorXd& q, double rho) const;
  double base_radial_partial(const Eigen::VectorXd& q, double rho) const;

  Base base_;
  double r1_ = 1.0, r2_ = 1.0;
  double eps_ = 0.0;
};

/// |X|^-eps H(X): returns the spec with the extra exponent folded in.
/// eps = 0 is the identity.
CurvatureSpec regularize(const CurvatureSpec& spec, double extra_epsilon);

struct HypothesisReport {
  HypothesisMode mode = HypothesisMode::Weak;
  bool pass = false;
  bool positivity_ok = false;
  double barrier_r1_margin = 0.0;    // min_q H(r1 q) - 1/r1
  double barrier_r2_margin = 0.0;    // min_q 1/r2 - H(r2 q)
  double monotonicity_margin = 0.0;  // min over (r1,r2) of -d/drho[rho H]
  bool monotonicity_vacuous = false; // r1 == r2
  double min_H = 0.0;                // over sampled A
  int q_samples = 0;
  int rho_samples = 0;
};

/// Samples the Theorem hypotheses over the domain: barrier inequalities at
/// r1 and r2 and radial monotonicity on (r1, r2). Strict mode demands
/// positive margins.
HypothesisReport check_hypotheses(const CurvatureSpec& spec, const ChartedDomain& domain,
                                  HypothesisMode mode, int q_samples = 10000,
                                  int rho_samples = 1000);

struct StructureConstants {
  double c1 = 0.0;  // max over A of |X|^2 |grad H|
  double c2 = 0.0;  // identically zero for this right-hand side
  double c3 = 0.0;  // max over A of |X| H(X)
};

/// Sample maxima of the gradient-estimate structure constants over A.
StructureConstants tw_constants(const CurvatureSpec& spec, const ChartedDomain& domain,
                                int q_samples = 2000, int rho_samples = 64);

}  // namespace rbump
