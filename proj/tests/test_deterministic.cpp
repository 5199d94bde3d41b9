#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "snfl/error.hpp"
#include "snfl/problem.hpp"
#include "snfl/quadrature.hpp"
#include "snfl/skeleton.hpp"

using namespace snfl;

namespace {
std::vector<double> sample(std::size_t n, double (*f)(double)) {
  std::vector<double> v(n + 1);
  for (std::size_t i = 0; i <= n; ++i) v[i] = f(static_cast<double>(i) / n);
  return v;
}
}  // namespace

TEST_CASE("quadrature of constants and x^2") {
  const auto one = sample(64, [](double) { return 1.0; });
  CHECK(quadrature(one, 1.0 / 64, Rule::trapezoid) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(quadrature(one, 1.0 / 64, Rule::simpson) == doctest::Approx(1.0).epsilon(1e-14));
  const auto sq = sample(64, [](double x) { return x * x; });
  CHECK(std::abs(quadrature(sq, 1.0 / 64, Rule::simpson) - 1.0 / 3.0) < 1e-10);
  const double h = 1.0 / 64;
  // trapezoid error h^2 (b-a) f'' / 12 with f'' = 2
  CHECK(quadrature(sq, h, Rule::trapezoid) == doctest::Approx(1.0 / 3.0 + h * h / 6.0).epsilon(1e-12));
  CHECK(quadrature(sq, h, Rule::trapezoid) == doctest::Approx(0.333374).epsilon(1e-6));
}

TEST_CASE("quadrature rejects bad input") {
  const std::vector<double> three{1, 2, 3, 4};
  CHECK_THROWS_AS((void)quadrature(three, 0.1, Rule::simpson), InvalidArgument);
  const std::vector<double> single{1.0};
  CHECK_THROWS_AS((void)quadrature(single, 0.1, Rule::trapezoid), InvalidArgument);
}

TEST_CASE("integrate handles odd interval counts at fourth order") {
  for (std::size_t n : {1u, 2u, 3u, 5u, 7u, 64u, 65u}) {
    CAPTURE(n);
    const auto cube = sample(n, [](double x) { return x * x * x; });
    const double expected = n == 1 ? 0.5 : 0.25;  // trapezoid for one interval
    CHECK(integrate(cube, 1.0 / n) == doctest::Approx(expected).epsilon(1e-13));
    const auto w = integration_weights(n, 1.0 / n);
    CHECK(std::inner_product(w.begin(), w.end(), cube.begin(), 0.0) ==
          doctest::Approx(integrate(cube, 1.0 / n)).epsilon(1e-14));
  }
  const auto e = sample(65, [](double x) { return std::exp(x); });
  CHECK(integrate(e, 1.0 / 65) == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-9));
}

TEST_CASE("cumulative_integral tracks the antiderivative") {
  const std::size_t n = 128;
  const auto c = sample(n, [](double x) { return std::cos(x); });
  const auto cum = cumulative_integral(c, 1.0 / n);
  REQUIRE(cum.size() == n + 1);
  CHECK(cum[0] == 0.0);
  double worst = 0.0;
  for (std::size_t i = 0; i <= n; ++i) worst = std::max(worst, std::abs(cum[i] - std::sin(i / double(n))));
  CHECK(worst < 1e-10);
}

TEST_CASE("skeleton examples") {
  const SkeletonPath s0 = solve_skeleton(builtin("P0"), 64);
  for (double x : s0.x) CHECK(x == 0.0);

  const SkeletonPath s1 = solve_skeleton(builtin("P1"), 256);
  CHECK(std::abs(s1.x.back() - std::exp(-1.0)) < 1e-10);
  CHECK(s1.euler_x.back() == doctest::Approx(std::pow(1.0 - 1.0 / 256, 256)).epsilon(1e-13));

  CHECK_THROWS_AS((void)solve_skeleton(builtin("P1"), 100), InvalidArgument);
  CHECK_THROWS_AS(s1.index_of(0.3), InvalidArgument);
  CHECK(s1.index_of(0.5) == 128);
}

TEST_CASE("RK4 refinement ratio on P2") {
  const Problem p = builtin("P2");
  const SkeletonPath a = solve_skeleton(p, 16), b = solve_skeleton(p, 32), c = solve_skeleton(p, 64);
  double e1 = 0.0, e2 = 0.0;
  for (std::size_t i = 0; i <= 16; ++i) e1 = std::max(e1, std::abs(a.x[i] - c.x[4 * i]));
  for (std::size_t i = 0; i <= 32; ++i) e2 = std::max(e2, std::abs(b.x[i] - c.x[2 * i]));
  // e1 ~ (1 + 1/16) err(16), e2 ~ err(32): ratio of the raw errors ~ 16
  const double ratio = e1 / e2;
  CHECK(ratio > 13.0);
  CHECK(ratio < 19.0);
}

TEST_CASE("skeleton reports a non-finite state with its step") {
  const Problem blow = load_problem(R"js({"label": "blow", "b": "exp(x)", "b1": "exp(x)", "b2": "exp(x)",
    "sigma": "1", "sigma1": "0", "sigma2": "0", "x0": 5, "horizon": 1})js");
  try {
    (void)solve_skeleton(blow, 64);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(e.step() < 64);
  }
}

TEST_CASE("beta and gamma variances") {
  const Problem p0 = builtin("P0"), p1 = builtin("P1");
  const SkeletonPath s0 = solve_skeleton(p0, 128), s1 = solve_skeleton(p1, 128);
  CHECK(beta_variance(p0, s0, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(beta_variance(p1, s1, 1.0) - (1.0 - std::exp(-2.0)) / 2.0) < 1e-8);
  CHECK(beta_variance(p1, s1, 0.0) == 0.0);
  CHECK(gamma_variance(p1, s1, 0.0) == 0.0);
  CHECK_THROWS_AS((void)beta_variance(p1, s1, 0.3), InvalidArgument);
  CHECK_THROWS_AS((void)gamma_variance(p0, s0, 1.0), InvalidArgument);

  // f' = c, b = 0, sigma = 1: gamma^2 = c^2 t^3 / 3
  const Problem lin = with_observable(p0, "3*x", "3", "0");
  for (double t : {0.25, 0.5, 1.0}) CHECK(gamma_variance(lin, s0, t) == doctest::Approx(3.0 * t * t * t).epsilon(1e-10));
}

TEST_CASE("beta and gamma converge at fourth order and beta increases") {
  for (const char* name : {"P1", "P2", "P3"}) {
    CAPTURE(std::string(name));
    Problem p = builtin(name);
    if (!p.has_f) p = with_observable(p, "2*x+sin(x)", "2+cos(x)", "-sin(x)");
    const SkeletonPath a = solve_skeleton(p, 32), b = solve_skeleton(p, 64), c = solve_skeleton(p, 128);
    const double db1 = std::abs(beta_variance(p, a, 1.0) - beta_variance(p, b, 1.0));
    const double db2 = std::abs(beta_variance(p, b, 1.0) - beta_variance(p, c, 1.0));
    const double dg1 = std::abs(gamma_variance(p, a, 1.0) - gamma_variance(p, b, 1.0));
    const double dg2 = std::abs(gamma_variance(p, b, 1.0) - gamma_variance(p, c, 1.0));
    CHECK(db2 < 1e-7);
    CHECK(dg2 < 1e-6);
    if (db2 > 1e-13) CHECK(db1 / db2 > 10.0);
    if (dg2 > 1e-13) CHECK(dg1 / dg2 > 10.0);

    const VarianceCurve curve = beta_curve(p, c);
    for (std::size_t i = 1; i < curve.value.size(); ++i) CHECK(curve.value[i] > curve.value[i - 1]);
  }
}

TEST_CASE("variance curve csv") {
  const Problem p = builtin("P1");
  const SkeletonPath s = solve_skeleton(p, 8);
  std::ostringstream os;
  write_csv(beta_curve(p, s), os);
  const std::string out = os.str();
  CHECK(out.rfind("#schema=", 0) == 0);
  CHECK(out.find("\nt,value\n") != std::string::npos);
}
