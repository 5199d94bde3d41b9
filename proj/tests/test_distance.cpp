#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "snfl/distance.hpp"
#include "snfl/error.hpp"
#include "snfl/functionals.hpp"
#include "snfl/kernel_regression.hpp"
#include "snfl/noise.hpp"
#include "snfl/skeleton.hpp"

using namespace snfl;

namespace {

std::vector<double> gaussian_draws(std::size_t n, double mu, double sd, std::uint64_t seed) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = mu + sd * standard_normal(NoiseKey{seed, i, 0}, 0);
  return x;
}

// samples whose regression target is exactly -(F - mean)/var
std::vector<MalliavinSample> gaussian_samples(std::size_t n, double var, std::uint64_t seed) {
  const auto x = gaussian_draws(n, 0.0, std::sqrt(var), seed);
  std::vector<MalliavinSample> ms(n);
  for (std::size_t i = 0; i < n; ++i) {
    ms[i].path_id = i;
    ms[i].F = x[i];
    ms[i].theta = var;
  }
  return ms;
}

}  // namespace

TEST_CASE("closed-form Gaussian Fisher distance") {
  CHECK(gaussian_fisher_closed(0.0, 1.0, 0.0, 2.0) == 0.25);
  CHECK(gaussian_fisher_closed(1.0, 1.0, 0.0, 1.0) == 1.0);
  CHECK(gaussian_fisher_closed(0.3, 0.7, 0.3, 0.7) == 0.0);
}

TEST_CASE("Kolmogorov distance examples") {
  SUBCASE("midpoint quantiles sit at 1/(2n)") {
    const std::size_t n = 1000;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = inverse_normal_cdf((static_cast<double>(i) + 0.5) / n);
    CHECK(kolmogorov_distance(x, 0.0, 1.0).estimate == doctest::Approx(0.5 / n).epsilon(1e-9));
  }
  SUBCASE("standard normal draws") {
    const auto x = gaussian_draws(100000, 0.0, 1.0, 3);
    const auto k = kolmogorov_distance(x, 0.0, 1.0);
    CHECK(k.estimate < 0.007);
    CHECK(k.band == doctest::Approx(std::sqrt(std::log(40.0) / 200000.0)));
  }
  SUBCASE("point mass at the mean") {
    const std::vector<double> x(500, 0.0);
    CHECK(kolmogorov_distance(x, 0.0, 1.0).estimate == doctest::Approx(0.5));
  }
  SUBCASE("band covers the null at the nominal rate") {
    int covered = 0;
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
      const auto x = gaussian_draws(5000, 0.0, 1.0, 1000 + rep);
      const auto k = kolmogorov_distance(x, 0.0, 1.0);
      covered += k.estimate <= k.band ? 1 : 0;
    }
    CHECK(covered >= 93);
  }
}

TEST_CASE("local-linear regression reproduces affine data") {
  const auto x = gaussian_draws(5000, 0.0, 1.0, 5);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = 2.5 - 0.75 * x[i];
  const std::vector<double> knots = {-2.0, -1.0, 0.0, 0.5, 1.7};
  const auto fit = local_linear(x, y, knots, silverman_bandwidth(x));
  for (std::size_t j = 0; j < knots.size(); ++j) CHECK(fit[j] == doctest::Approx(2.5 - 0.75 * knots[j]).epsilon(1e-10));
}

TEST_CASE("exact score gives zero distance") {
  const auto x = gaussian_draws(20000, 0.4, std::sqrt(0.7), 9);
  const auto sm = score_from_function([](double v) { return -(v - 0.4) / 0.7; }, -6.0, 7.0, 4001);
  const auto fe = fisher_distance(sm, x, 0.4, 0.7);
  CHECK(fe.estimate < 1e-20);
  CHECK_FALSE(fe.warning);
}

TEST_CASE("exact-score estimate matches the closed form") {
  // F ~ N(0,1) against N(0,2): closed form 0.25
  const auto x = gaussian_draws(100000, 0.0, 1.0, 11);
  const auto sm = score_from_function([](double v) { return -v; }, -8.0, 8.0, 4001);
  const auto fe = fisher_distance(sm, x, 0.0, 2.0);
  CHECK(std::abs(fe.estimate - 0.25) < 3.0 * fe.std_error);
  CHECK(fe.std_error > 0.0);
}

TEST_CASE("regression score") {
  SUBCASE("Gaussian samples with exact weights give a null distance") {
    const auto ms = gaussian_samples(40000, 0.5, 13);
    const auto fe = fisher_by_regression(ms, 0.0, 0.5);
    CHECK(fe.estimate < 0.01);
    CHECK(fe.estimate <= 3.0 * fe.std_error + 1e-12);
  }
  SUBCASE("a vanishing target gives a vanishing score") {
    auto ms = gaussian_samples(5000, 1.0, 15);
    double mean = 0.0;
    for (const auto& s : ms) mean += s.F;
    mean /= static_cast<double>(ms.size());
    for (auto& s : ms) {
      s.theta = 1.0 + 0.5 * std::sin(s.F);
      s.dtheta_u = -(s.F - mean) * s.theta;
    }
    const auto sm = score_by_regression(ms);
    for (double v : sm.values) CHECK(std::abs(v) < 1e-9);
  }
  SUBCASE("sample order does not matter") {
    auto ms = gaussian_samples(8000, 1.0, 17);
    for (auto& s : ms) s.theta = 1.0 + 0.2 * std::cos(s.F);
    const auto a = score_by_regression(ms);
    std::reverse(ms.begin(), ms.end());
    std::rotate(ms.begin(), ms.begin() + 1234, ms.end());
    const auto b = score_by_regression(ms);
    REQUIRE(a.values.size() == b.values.size());
    for (std::size_t j = 0; j < a.values.size(); ++j) {
      CHECK(a.knots[j] == doctest::Approx(b.knots[j]).epsilon(1e-12));
      CHECK(a.values[j] == doctest::Approx(b.values[j]).epsilon(1e-9));
    }
  }
  SUBCASE("rejects thin or degenerate input") {
    CHECK_THROWS_AS(score_by_regression(gaussian_samples(999, 1.0, 19)), InvalidArgument);
    auto ms = gaussian_samples(2000, 1.0, 19);
    for (auto& s : ms) s.F = 1.0;
    CHECK_THROWS_AS(score_by_regression(ms), InvalidArgument);
  }
}

TEST_CASE("KDE score") {
  const auto x = gaussian_draws(100000, 0.0, 1.0, 23);
  const auto fe = fisher_by_kde(x, 0.0, 1.0);
  CHECK(fe.estimate < 0.02);
  const std::vector<double> flat(2000, 3.0);
  CHECK_THROWS_AS(score_by_kde(flat), InvalidArgument);
}

TEST_CASE("estimators agree on a nonlinear problem") {
  const Problem p = builtin("P2");
  const SkeletonPath sk = solve_skeleton(p, 64);
  EnsembleSpec spec;
  spec.eps = 0.2;
  spec.paths = 64000;
  spec.seed = 29;
  spec.gradient = true;
  spec.limit_control = true;
  const Ensemble e = sample_ensemble(p, sk, spec);
  std::vector<double> F(e.samples.size());
  for (std::size_t i = 0; i < F.size(); ++i) F[i] = e.samples[i].F;

  const auto reg = fisher_by_regression(e.samples, 0.0, e.control_var);
  const auto kde = fisher_by_kde(F, 0.0, e.control_var);
  CAPTURE(reg.estimate);
  CAPTURE(reg.std_error);
  CAPTURE(kde.estimate);
  CAPTURE(kde.std_error);
  CHECK(reg.estimate > 3.0 * reg.std_error);
  CHECK(std::abs(reg.estimate - kde.estimate) < 3.0 * std::hypot(reg.std_error, kde.std_error));

  ScoreOptions doubled;
  doubled.knots = 256;
  const auto fine = fisher_by_regression(e.samples, 0.0, e.control_var, doubled);
  CAPTURE(fine.estimate);
  CHECK(std::abs(fine.estimate - reg.estimate) < reg.std_error);
}

TEST_CASE("Pinsker check") {
  DistanceReport r;
  r.kolmogorov_band = 0.0;
  SUBCASE("comfortably inside") {
    r.fisher = 0.04;
    r.kolmogorov = 0.1;
    const auto v = pinsker_check(r);
    CHECK(v.pass);
    CHECK(v.slack == doctest::Approx(0.1));
  }
  SUBCASE("both zero") {
    const auto v = pinsker_check(r);
    CHECK(v.pass);
    CHECK(v.slack == 0.0);
  }
  SUBCASE("violated") {
    r.fisher = 1e-4;
    r.kolmogorov = 0.5;
    r.kolmogorov_band = 0.01;
    CHECK_FALSE(pinsker_check(r).pass);
  }
}

TEST_CASE("report JSON carries every field") {
  DistanceReport r;
  r.eps = 0.1;
  r.fisher = 0.5;
  const std::string js = to_json(r);
  for (const char* key : {"\"eps\"", "\"t\"", "\"n\"", "\"mu\"", "\"var\"", "\"fisher\"", "\"fisher_se\"",
                          "\"kolmogorov\"", "\"kolmogorov_band\"", "\"method\"", "\"bandwidth\"",
                          "\"outside_fraction\"", "\"warning\""})
    CHECK(js.find(key) != std::string::npos);
}
