#include "rbump/curvature.hpp"

#include <cmath>
#include <limits>

namespace rbump {

namespace {

constexpr double kRoundoff = 1e-12;

Eigen::VectorXd unit_from_chart(const ChartedDomain& domain, const Eigen::VectorXd& x) {
  return domain.to_sphere(x);
}

}  // namespace

CurvatureSpec::CurvatureSpec(Base base, double r1, double r2, double epsilon)
    : base_(std::move(base)), r1_(r1), r2_(r2), eps_(epsilon) {
  if (!(r1 > 0.0 && r1 <= 1.0 && r2 >= 1.0 && std::isfinite(r2)))
    throw CurvatureError("radii must satisfy 0 < r1 <= 1 <= r2 < inf");
  if (eps_ < 0.0) throw CurvatureError("regularization exponent must be >= 0");
}

CurvatureSpec CurvatureSpec::constant(double c, double r1, double r2, double epsilon) {
  return CurvatureSpec(ConstantCurvature{c}, r1, r2, epsilon);
}

CurvatureSpec CurvatureSpec::radial_power(double c, double gamma, double r1, double r2,
                                          double epsilon) {
  return CurvatureSpec(RadialPowerCurvature{c, gamma}, r1, r2, epsilon);
}

CurvatureSpec CurvatureSpec::separable(Expression f, Expression g, double r1, double r2,
                                       double epsilon) {
  if (f.variable_count() != 1)
    throw CurvatureError("separable radial factor must be an expression in rho alone");
  return CurvatureSpec(SeparableCurvature{std::move(f), std::move(g)}, r1, r2, epsilon);
}

CurvatureSpec CurvatureSpec::tabulated(std::function<double(const Eigen::VectorXd&)> value,
                                       std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient,
                                       double r1, double r2, double epsilon) {
  if (!value) throw CurvatureError("tabulated curvature needs a value callable");
  return CurvatureSpec(TabulatedCurvature{std::move(value), std::move(gradient)}, r1, r2, epsilon);
}

double CurvatureSpec::base_eval(const Eigen::VectorXd& q, double rho) const {
  const double reg = std::pow(rho, -eps_);
  if (const auto* c = std::get_if<ConstantCurvature>(&base_)) return reg * c->c;
  if (const auto* p = std::get_if<RadialPowerCurvature>(&base_))
    return reg * p->c * std::pow(rho, -p->gamma);
  if (const auto* s = std::get_if<SeparableCurvature>(&base_)) {
    double fr = s->f.eval(std::span<const double>(&rho, 1));
    std::vector<double> qv(q.data(), q.data() + q.size());
    return reg * fr * s->g.eval(qv);
  }
  const auto& t = std::get<TabulatedCurvature>(base_);
  return reg * t.value(rho * q);
}

double CurvatureSpec::base_radial_partial(const Eigen::VectorXd& q, double rho) const {
  if (const auto* c = std::get_if<ConstantCurvature>(&base_))
    return -eps_ * c->c * std::pow(rho, -eps_ - 1.0);
  if (const auto* p = std::get_if<RadialPowerCurvature>(&base_))
    return -(p->gamma + eps_) * p->c * std::pow(rho, -p->gamma - eps_ - 1.0);
  if (const auto* s = std::get_if<SeparableCurvature>(&base_)) {
    double df = 0.0;
    double fr = s->f.eval_with_gradient(std::span<const double>(&rho, 1), std::span<double>(&df, 1));
    std::vector<double> qv(q.data(), q.data() + q.size());
    double g = s->g.eval(qv);
    return g * (df * std::pow(rho, -eps_) - eps_ * fr * std::pow(rho, -eps_ - 1.0));
  }
  // Tabulated: centered differences, step scaled by rho.
  const double step = 1e-6 * rho;
  return (base_eval(q, rho + step) - base_eval(q, rho - step)) / (2.0 * step);
}

double CurvatureSpec::h1(const Eigen::VectorXd& q) const {
  return base_eval(q, r1_) + r1_ * base_radial_partial(q, r1_);
}

double CurvatureSpec::h2(const Eigen::VectorXd& q) const {
  return base_eval(q, r2_) + r2_ * base_radial_partial(q, r2_);
}

double CurvatureSpec::evaluate(const Eigen::VectorXd& q, double rho) const {
  if (!(rho > 0.0)) throw CurvatureError("curvature evaluated at non-positive radius");
  if (rho < r1_) {
    const double ratio = r1_ / rho;
    return ratio * base_eval(q, r1_) + (1.0 - ratio) * h1(q);
  }
  if (rho > r2_) {
    const double ratio = r2_ / rho;
    return ratio * base_eval(q, r2_) + (1.0 - ratio) * h2(q);
  }
  return base_eval(q, rho);
}

double CurvatureSpec::evaluate_point(const Eigen::VectorXd& X) const {
  const double rho = X.norm();
  if (!(rho > 0.0)) throw CurvatureError("curvature evaluated at the origin");
  return evaluate(X / rho, rho);
}

double CurvatureSpec::radial_partial(const Eigen::VectorXd& q, double rho) const {
  if (!(rho > 0.0)) throw CurvatureError("curvature evaluated at non-positive radius");
  if (rho < r1_) return -(r1_ / (rho * rho)) * (base_eval(q, r1_) - h1(q));
  if (rho > r2_) return -(r2_ / (rho * rho)) * (base_eval(q, r2_) - h2(q));
  return base_radial_partial(q, rho);
}

double CurvatureSpec::radial_derivative(const Eigen::VectorXd& q, double rho) const {
  if (!(rho > 0.0)) throw CurvatureError("curvature evaluated at non-positive radius");
  if (is_tabulated()) {
    const double step = 1e-6 * rho;
    const double above = (rho + step) * evaluate(q, rho + step);
    const double below = (rho - step) * evaluate(q, rho - step);
    return (above - below) / (2.0 * step);
  }
  if (rho < r1_) return h1(q);   // extension is affine in rho after the rho-weighting
  if (rho > r2_) return h2(q);
  return base_eval(q, rho) + rho * base_radial_partial(q, rho);
}

Eigen::VectorXd CurvatureSpec::ambient_gradient(const Eigen::VectorXd& q, double rho) const {
  const double reg = std::pow(rho, -eps_);
  if (const auto* c = std::get_if<ConstantCurvature>(&base_))
    return -eps_ * c->c * std::pow(rho, -eps_ - 1.0) * q;
  if (const auto* p = std::get_if<RadialPowerCurvature>(&base_))
    return -(p->gamma + eps_) * p->c * std::pow(rho, -p->gamma - eps_ - 1.0) * q;
  if (const auto* s = std::get_if<SeparableCurvature>(&base_)) {
    double df = 0.0;
    double fr = s->f.eval_with_gradient(std::span<const double>(&rho, 1), std::span<double>(&df, 1));
    std::vector<double> qv(q.data(), q.data() + q.size());
    std::vector<double> gg(qv.size(), 0.0);
    double g = s->g.eval_with_gradient(qv, gg);
    Eigen::Map<const Eigen::VectorXd> grad_g(gg.data(), static_cast<Eigen::Index>(gg.size()));
    Eigen::VectorXd tangential = grad_g - grad_g.dot(q) * q;
    return (df * reg - eps_ * fr * reg / rho) * g * q + fr * reg / rho * tangential;
  }
  const auto& t = std::get<TabulatedCurvature>(base_);
  const Eigen::VectorXd X = rho * q;
  Eigen::VectorXd grad_base;
  if (t.gradient) {
    grad_base = t.gradient(X);
  } else {
    grad_base.resize(X.size());
    const double step = 1e-6 * (1.0 + rho);
    for (Eigen::Index i = 0; i < X.size(); ++i) {
      Eigen::VectorXd xp = X, xm = X;
      xp(i) += step;
      xm(i) -= step;
      grad_base(i) = (t.value(xp) - t.value(xm)) / (2.0 * step);
    }
  }
  return reg * grad_base - eps_ * reg / rho * t.value(X) * q;
}

CurvatureSpec regularize(const CurvatureSpec& spec, double extra_epsilon) {
  if (extra_epsilon < 0.0) throw CurvatureError("regularization exponent must be >= 0");
  if (extra_epsilon == 0.0) return spec;
  return CurvatureSpec(spec.base(), spec.r1(), spec.r2(), spec.epsilon() + extra_epsilon);
}

HypothesisReport check_hypotheses(const CurvatureSpec& spec, const ChartedDomain& domain,
                                  HypothesisMode mode, int q_samples, int rho_samples) {
  HypothesisReport rep;
  rep.mode = mode;
  rep.rho_samples = rho_samples;

  DomainSamples samples = sample_domain(domain, q_samples, std::max(64, q_samples / 10));
  std::vector<Eigen::VectorXd> qs;
  qs.reserve(samples.interior_chart.size() + samples.boundary_chart.size());
  for (const auto& x : samples.interior_chart) qs.push_back(unit_from_chart(domain, x));
  for (const auto& x : samples.boundary_chart) qs.push_back(unit_from_chart(domain, x));
  rep.q_samples = static_cast<int>(qs.size());

  const double r1 = spec.r1(), r2 = spec.r2();
  double b1 = std::numeric_limits<double>::infinity();
  double b2 = std::numeric_limits<double>::infinity();
  double mono = std::numeric_limits<double>::infinity();
  double min_h = std::numeric_limits<double>::infinity();

  rep.monotonicity_vacuous = (r2 - r1) < kRoundoff;
  for (const Eigen::VectorXd& q : qs) {
    b1 = std::min(b1, spec.evaluate(q, r1) - 1.0 / r1);
    b2 = std::min(b2, 1.0 / r2 - spec.evaluate(q, r2));
    min_h = std::min(min_h, std::min(spec.evaluate(q, r1), spec.evaluate(q, r2)));
    if (!rep.monotonicity_vacuous) {
      for (int j = 0; j < rho_samples; ++j) {
        const double rho = r1 + (j + 0.5) * (r2 - r1) / rho_samples;
        mono = std::min(mono, -spec.radial_derivative(q, rho));
        min_h = std::min(min_h, spec.evaluate(q, rho));
      }
    }
  }

  rep.barrier_r1_margin = b1;
  rep.barrier_r2_margin = b2;
  rep.monotonicity_margin = mono;
  rep.min_H = min_h;
  rep.positivity_ok = min_h > 0.0;

  if (mode == HypothesisMode::Weak) {
    rep.pass = rep.positivity_ok && b1 >= -kRoundoff && b2 >= -kRoundoff &&
               (rep.monotonicity_vacuous || mono >= -kRoundoff);
  } else {
    rep.pass = rep.positivity_ok && b1 > 0.0 && b2 > 0.0 &&
               !rep.monotonicity_vacuous && mono > 0.0;
  }
  return rep;
}

StructureConstants tw_constants(const CurvatureSpec& spec, const ChartedDomain& domain,
                                int q_samples, int rho_samples) {
  DomainSamples samples = sample_domain(domain, q_samples, std::max(32, q_samples / 10));
  std::vector<Eigen::VectorXd> qs;
  for (const auto& x : samples.interior_chart) qs.push_back(unit_from_chart(domain, x));
  for (const auto& x : samples.boundary_chart) qs.push_back(unit_from_chart(domain, x));

  StructureConstants out;
  const double r1 = spec.r1(), r2 = spec.r2();
  for (const Eigen::VectorXd& q : qs) {
    for (int j = 0; j < rho_samples; ++j) {
      const double rho = rho_samples == 1 ? r1 : r1 + j * (r2 - r1) / (rho_samples - 1);
      out.c1 = std::max(out.c1, rho * rho * spec.ambient_gradient(q, rho).norm());
      out.c3 = std::max(out.c3, rho * spec.evaluate(q, rho));
    }
  }
  out.c2 = 0.0;
  return out;
}

}  // namespace rbump
