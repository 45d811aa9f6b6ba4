#include <doctest.h>

#include <cmath>

#include "rbump/curvature.hpp"

using namespace rbump;

namespace {

Eigen::VectorXd vec3(double a, double b, double c) {
  Eigen::VectorXd v(3);
  v << a, b, c;
  return v;
}

ChartedDomain cap60() { return ChartedDomain::cap(2, vec3(0, 0, 1), M_PI / 3, 0.1); }

const Eigen::VectorXd kAxis = (Eigen::VectorXd(3) << 0, 0, 1).finished();

}  // namespace

TEST_CASE("inverse-radius curvature: rho*H is one everywhere, slopes vanish") {
  CurvatureSpec spec = CurvatureSpec::radial_power(1.0, 1.0, 0.5, 2.0);
  CHECK(std::abs(spec.h1(kAxis)) < 1e-14);
  CHECK(std::abs(spec.h2(kAxis)) < 1e-14);
  for (double rho : {0.05, 0.2, 0.5, 1.0, 2.0, 5.0, 40.0}) {
    CHECK(spec.evaluate(kAxis, rho) == doctest::Approx(1.0 / rho).epsilon(1e-14));
    CHECK(std::abs(spec.radial_derivative(kAxis, rho)) < 1e-13);
  }
}

TEST_CASE("inverse-square curvature: extension below r1 is the affine continuation") {
  // H = |X|^-2 with r1 = 1/2: h1 = -rho^-2 at r1 = -4, so rho*H = 4 - 4 rho
  // below r1 and H(1/4) = 12.
  CurvatureSpec spec = CurvatureSpec::radial_power(1.0, 2.0, 0.5, 2.0);
  CHECK(spec.h1(kAxis) == doctest::Approx(-4.0).epsilon(1e-14));
  CHECK(spec.evaluate(kAxis, 0.25) == doctest::Approx(12.0).epsilon(1e-14));
  for (double rho : {0.05, 0.1, 0.3, 0.45}) {
    CHECK(rho * spec.evaluate(kAxis, rho) == doctest::Approx(4.0 - 4.0 * rho).epsilon(1e-13));
    // Below r1 the rho-weighted extension is affine with slope h1.
    CHECK(spec.radial_derivative(kAxis, rho) == doctest::Approx(-4.0).epsilon(1e-14));
  }
  // In the annulus: d/drho (rho * rho^-2) = -rho^-2.
  CHECK(spec.radial_derivative(kAxis, 1.0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(spec.radial_derivative(kAxis, 1.5) == doctest::Approx(-1.0 / 2.25).epsilon(1e-13));
}

TEST_CASE("extension is C1 at both junctions (two-sided FD within 1e-6)") {
  ChartedDomain dom = cap60();
  DomainSamples samples = sample_domain(dom, 40, 10);

  auto check_spec = [&](const CurvatureSpec& spec) {
    // Second-order one-sided slopes of rho -> rho H from each side of the
    // junction; a derivative jump would show up at O(1), continuity leaves
    // only the O(step^2) truncation.
    const double step = 1e-4;
    auto weighted = [&](const Eigen::VectorXd& q, double rho) {
      return rho * spec.evaluate(q, rho);
    };
    for (const auto& x : samples.interior_chart) {
      Eigen::VectorXd q = dom.to_sphere(x);
      for (double r : {spec.r1(), spec.r2()}) {
        const double above =
            (-3.0 * weighted(q, r) + 4.0 * weighted(q, r + step) - weighted(q, r + 2 * step)) /
            (2 * step);
        const double below =
            (3.0 * weighted(q, r) - 4.0 * weighted(q, r - step) + weighted(q, r - 2 * step)) /
            (2 * step);
        CHECK(std::abs(above - below) < 1e-6);
      }
    }
  };
  check_spec(CurvatureSpec::radial_power(1.0, 2.0, 0.5, 2.0));
  check_spec(CurvatureSpec::radial_power(0.8, 1.5, 0.7, 1.6, 0.05));
  check_spec(CurvatureSpec::separable(Expression::parse("1/rho", {"rho"}),
                                      Expression::parse("1 + 0.1*q3", {"q1", "q2", "q3"}), 0.5,
                                      2.0));
}

TEST_CASE("weak hypotheses hold for H = |X|^-1 with equality margins") {
  CurvatureSpec spec = CurvatureSpec::radial_power(1.0, 1.0, 0.5, 2.0);
  HypothesisReport rep = check_hypotheses(spec, cap60(), HypothesisMode::Weak, 500, 50);
  CHECK(rep.pass);
  CHECK(rep.positivity_ok);
  CHECK(std::abs(rep.barrier_r1_margin) < 1e-12);
  CHECK(std::abs(rep.barrier_r2_margin) < 1e-12);
  CHECK(std::abs(rep.monotonicity_margin) < 1e-12);

  HypothesisReport strict = check_hypotheses(spec, cap60(), HypothesisMode::Strict, 500, 50);
  CHECK_FALSE(strict.pass);
}

TEST_CASE("constant curvature: weak pass only with r1 = r2 = 1") {
  CurvatureSpec ok = CurvatureSpec::constant(1.0, 1.0, 1.0);
  HypothesisReport rep = check_hypotheses(ok, cap60(), HypothesisMode::Weak, 300, 20);
  CHECK(rep.pass);
  CHECK(rep.monotonicity_vacuous);

  // H == 1 with r1 = 1/2 violates the lower barrier: H(r1 q) = 1 < 2.
  CurvatureSpec bad = CurvatureSpec::constant(1.0, 0.5, 1.0);
  HypothesisReport rep_bad = check_hypotheses(bad, cap60(), HypothesisMode::Weak, 300, 20);
  CHECK_FALSE(rep_bad.pass);
  CHECK(rep_bad.barrier_r1_margin == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("separable curvature margins on the 60-degree cap") {
  // H(rho q) = rho^-2 (1 + 0.1 q3) with q3 in [1/2, 1] on the cap:
  //   r1 barrier: 4 (1 + 0.1 q3) - 2            -> min 2.2
  //   r2 barrier: 1/2 - (1/4)(1 + 0.1 q3)       -> min 0.225
  //   monotonicity: g(q)/rho^2 on (r1, r2)      -> inf 0.2625 (at rho -> r2)
  CurvatureSpec spec =
      CurvatureSpec::separable(Expression::parse("1/(rho*rho)", {"rho"}),
                               Expression::parse("1 + 0.1*q3", {"q1", "q2", "q3"}), 0.5, 2.0);
  HypothesisReport weak = check_hypotheses(spec, cap60(), HypothesisMode::Weak, 400, 40);
  CHECK(weak.pass);
  CHECK(weak.barrier_r1_margin == doctest::Approx(2.2).epsilon(1e-9));
  // The interior sample set approaches but does not contain the cap center,
  // so the r2 margin sits just above its infimum 0.225.
  CHECK(weak.barrier_r2_margin >= 0.225 - 1e-12);
  CHECK(weak.barrier_r2_margin < 0.2255);
  // Sampling stays off the open-interval endpoint, so the margin sits just
  // above the infimum.
  CHECK(weak.monotonicity_margin > 0.2625);
  CHECK(weak.monotonicity_margin < 0.28);

  HypothesisReport strict = check_hypotheses(spec, cap60(), HypothesisMode::Strict, 400, 40);
  CHECK(strict.pass);
}

TEST_CASE("regularize: identity at eps = 0, strictness for eps > 0") {
  CurvatureSpec spec = CurvatureSpec::radial_power(1.0, 1.0, 0.5, 2.0);
  CurvatureSpec same = regularize(spec, 0.0);
  CHECK(same.epsilon() == spec.epsilon());

  CurvatureSpec reg = regularize(spec, 0.1);
  // H_eps(r1 q) = r1^{-1.1} > r1^{-1}.
  CHECK(reg.evaluate(kAxis, 0.5) == doctest::Approx(std::pow(0.5, -1.1)).epsilon(1e-14));
  HypothesisReport strict = check_hypotheses(reg, cap60(), HypothesisMode::Strict, 400, 40);
  CHECK(strict.pass);
  CHECK(strict.barrier_r1_margin > 0.0);
  CHECK(strict.barrier_r2_margin > 0.0);
  CHECK(strict.monotonicity_margin > 0.0);
}

TEST_CASE("regularization improves the monotonicity margin pointwise") {
  // d/drho(rho H_eps) = rho^-eps [d/drho(rho H) - eps H] <= rho^-eps d/drho(rho H).
  ChartedDomain dom = cap60();
  DomainSamples samples = sample_domain(dom, 30, 5);
  CurvatureSpec spec = CurvatureSpec::radial_power(1.0, 1.5, 0.5, 2.0);
  CurvatureSpec reg = regularize(spec, 0.07);
  for (const auto& x : samples.interior_chart) {
    Eigen::VectorXd q = dom.to_sphere(x);
    for (double rho : {0.6, 1.0, 1.7}) {
      const double lhs = reg.radial_derivative(q, rho);
      const double rhs = std::pow(rho, -0.07) * spec.radial_derivative(q, rho);
      CHECK(lhs <= rhs + 1e-12);
    }
  }
}

TEST_CASE("regularized curvature converges to the base spec as eps -> 0") {
  ChartedDomain dom = cap60();
  DomainSamples samples = sample_domain(dom, 50, 10);
  CurvatureSpec spec = CurvatureSpec::radial_power(1.3, 2.0, 0.5, 2.0);

  double max_h = 0.0;
  for (const auto& x : samples.interior_chart)
    for (double rho : {0.5, 1.0, 2.0})
      max_h = std::max(max_h, spec.evaluate(dom.to_sphere(x), rho));

  for (double eps : {0.1, 0.01, 0.001}) {
    CurvatureSpec reg = regularize(spec, eps);
    const double bound = (std::max(std::pow(2.0, eps), std::pow(0.5, -eps)) - 1.0) * max_h;
    double sup = 0.0;
    for (const auto& x : samples.interior_chart) {
      Eigen::VectorXd q = dom.to_sphere(x);
      for (double rho : {0.5, 0.8, 1.0, 1.5, 2.0})
        sup = std::max(sup, std::abs(reg.evaluate(q, rho) - spec.evaluate(q, rho)));
    }
    CHECK(sup <= bound + 1e-12);
  }
}

TEST_CASE("extended monotonicity holds on the whole ray for weak-pass specs") {
  ChartedDomain dom = cap60();
  DomainSamples samples = sample_domain(dom, 30, 10);
  for (const CurvatureSpec& spec : {CurvatureSpec::radial_power(1.0, 1.0, 0.5, 2.0),
                                    CurvatureSpec::radial_power(1.0, 2.0, 0.5, 2.0),
                                    CurvatureSpec::radial_power(1.0, 1.3, 0.7, 1.8, 0.05)}) {
    REQUIRE(check_hypotheses(spec, dom, HypothesisMode::Weak, 200, 30).pass);
    for (const auto& x : samples.interior_chart) {
      Eigen::VectorXd q = dom.to_sphere(x);
      for (int j = 1; j <= 120; ++j) {
        const double rho = j * (3.0 * spec.r2()) / 120.0;
        CHECK(spec.radial_derivative(q, rho) <= 1e-12);
      }
    }
  }
}

TEST_CASE("extended strict barriers hold outside the annulus for strict-pass specs") {
  ChartedDomain dom = cap60();
  CurvatureSpec reg = regularize(CurvatureSpec::radial_power(1.0, 1.0, 0.5, 2.0), 0.1);
  REQUIRE(check_hypotheses(reg, dom, HypothesisMode::Strict, 200, 30).pass);
  DomainSamples samples = sample_domain(dom, 30, 10);
  for (const auto& x : samples.interior_chart) {
    Eigen::VectorXd q = dom.to_sphere(x);
    for (double rho : {0.05, 0.2, 0.4, 0.5}) CHECK(reg.evaluate(q, rho) > 1.0 / rho);
    for (double rho : {2.0, 3.0, 8.0}) CHECK(reg.evaluate(q, rho) < 1.0 / rho);
  }
}

TEST_CASE("structure constants") {
  ChartedDomain dom = cap60();
  // H = |X|^-1: |X|^2 |grad H| = 1 and |X| H = 1 on all of A.
  StructureConstants inv = tw_constants(CurvatureSpec::radial_power(1.0, 1.0, 0.5, 2.0), dom);
  CHECK(inv.c1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(inv.c2 == 0.0);
  CHECK(inv.c3 == doctest::Approx(1.0).epsilon(1e-12));

  // Constant H = c: gradient vanishes, C3 = c * r2.
  StructureConstants cst = tw_constants(CurvatureSpec::constant(0.7, 1.0, 1.0), dom);
  CHECK(std::abs(cst.c1) < 1e-14);
  CHECK(cst.c3 == doctest::Approx(0.7).epsilon(1e-12));

  StructureConstants cst2 = tw_constants(CurvatureSpec::constant(0.5, 1.0, 2.0), dom);
  CHECK(cst2.c3 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ambient gradient agrees with finite differences") {
  CurvatureSpec sep = CurvatureSpec::separable(
      Expression::parse("1/(rho*rho)", {"rho"}),
      Expression::parse("1 + 0.2*q3 - 0.05*q1*q2", {"q1", "q2", "q3"}), 0.5, 2.0, 0.03);
  CurvatureSpec pow = CurvatureSpec::radial_power(1.2, 1.7, 0.5, 2.0, 0.1);

  ChartedDomain dom = cap60();
  DomainSamples samples = sample_domain(dom, 15, 5);
  const double step = 1e-6;
  for (const CurvatureSpec* spec : {&sep, &pow}) {
    for (const auto& x : samples.interior_chart) {
      Eigen::VectorXd q = dom.to_sphere(x);
      for (double rho : {0.7, 1.0, 1.6}) {
        Eigen::VectorXd X = rho * q;
        Eigen::VectorXd grad = spec->ambient_gradient(q, rho);
        for (int i = 0; i < 3; ++i) {
          Eigen::VectorXd xp = X, xm = X;
          xp(i) += step;
          xm(i) -= step;
          const double fd = (spec->evaluate_point(xp) - spec->evaluate_point(xm)) / (2 * step);
          CHECK(grad(i) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
        }
      }
    }
  }
}

TEST_CASE("tabulated curvature tracks its closed-form twin") {
  auto value = [](const Eigen::VectorXd& X) { return 1.0 / X.squaredNorm(); };
  CurvatureSpec tab = CurvatureSpec::tabulated(value, nullptr, 0.5, 2.0);
  CurvatureSpec pow = CurvatureSpec::radial_power(1.0, 2.0, 0.5, 2.0);
  for (double rho : {0.2, 0.5, 0.9, 1.5, 2.0, 3.0}) {
    CHECK(tab.evaluate(kAxis, rho) == doctest::Approx(pow.evaluate(kAxis, rho)).epsilon(1e-8));
    CHECK(tab.radial_derivative(kAxis, rho) ==
          doctest::Approx(pow.radial_derivative(kAxis, rho)).epsilon(1e-6));
  }
}

TEST_CASE("curvature input validation") {
  CHECK_THROWS_AS(CurvatureSpec::radial_power(1.0, 1.0, 0.0, 2.0), CurvatureError);
  CHECK_THROWS_AS(CurvatureSpec::radial_power(1.0, 1.0, 0.5, 0.9), CurvatureError);
  CHECK_THROWS_AS(CurvatureSpec::radial_power(1.0, 1.0, 1.1, 2.0), CurvatureError);
  CurvatureSpec ok = CurvatureSpec::radial_power(1.0, 1.0, 0.5, 2.0);
  CHECK_THROWS_AS(ok.evaluate(kAxis, 0.0), CurvatureError);
  CHECK_THROWS_AS(ok.evaluate(kAxis, -1.0), CurvatureError);
  CHECK_THROWS_AS(regularize(ok, -0.1), CurvatureError);
}
