#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "snfl/error.hpp"
#include "snfl/functionals.hpp"
#include "snfl/noise.hpp"
#include "snfl/path_engine.hpp"
#include "snfl/rate_fit.hpp"
#include "support.hpp"

using namespace snfl;
using snfl::test::stats;

TEST_CASE("philox known answers") {
  // Random123 kat_vectors for philox4x32-10
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        std::array<std::uint32_t, 4>{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        std::array<std::uint32_t, 4>{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("inverse normal cdf") {
  CHECK(inverse_normal_cdf(0.5) == 0.0);
  CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-15));
  CHECK(inverse_normal_cdf(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-14));
  for (double p : {0x1p-40, 0.0078125, 0.125, 0.25, 0.4375})
    CHECK(inverse_normal_cdf(p) == doctest::Approx(-inverse_normal_cdf(1.0 - p)).epsilon(1e-15));
  CHECK(std::isfinite(inverse_normal_cdf(1e-300)));
  for (double z : {-5.0, -1.0, 0.2, 3.0}) {
    const double p = 0.5 * std::erfc(-z / std::sqrt(2.0));
    CHECK(inverse_normal_cdf(p) == doctest::Approx(z).epsilon(1e-12));
  }
}

TEST_CASE("noise streams") {
  const NoiseStream a = noise(3, 17, 128, 1.0), b = noise(3, 17, 128, 1.0);
  CHECK(a.dB == b.dB);
  CHECK(noise(4, 17, 128, 1.0).dB != a.dB);
  CHECK_THROWS_AS((void)noise(1, 1, 0, 1.0), InvalidArgument);
  CHECK_THROWS_AS((void)noise(1, 1, 8, 0.0), InvalidArgument);

  // pooled 10^6 increments at h = 1/128
  const double h = 1.0 / 128;
  std::vector<double> pooled;
  pooled.reserve(1u << 20);
  for (std::uint64_t id = 0; id < 8192; ++id) {
    const NoiseStream s = noise(11, id, 128, 1.0);
    pooled.insert(pooled.end(), s.dB.begin(), s.dB.end());
  }
  const auto st = stats(pooled);
  CHECK(st.var > h * 0.99);
  CHECK(st.var < h * 1.01);

  // distinct path ids are uncorrelated
  std::vector<double> x(100000), y(100000);
  fill_increments({5, 1, 0}, 1.0, x);
  fill_increments({5, 2, 0}, 1.0, y);
  const auto sx = stats(x), sy = stats(y);
  double c = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) c += (x[i] - sx.mean) * (y[i] - sy.mean);
  c /= (x.size() - 1.0) * std::sqrt(sx.var * sy.var);
  CHECK(std::abs(c) < 0.01);

  // keyed access equals the filled stream
  CHECK(standard_normal({5, 1, 0}, 777) == x[777]);
}

TEST_CASE("simulate_sde basics") {
  const Problem p2 = builtin("P2");
  const SkeletonPath sk = solve_skeleton(p2, 128);
  const NoiseStream ns = noise(1, 0, 128, 1.0);
  const PathState zero = simulate_sde(p2, 0.0, ns, sk);
  double worst = 0.0;
  for (std::size_t i = 0; i <= 128; ++i) {
    CHECK(zero.X[i] == sk.euler_x[i]);
    worst = std::max(worst, std::abs(zero.X[i] - sk.x[i]));
  }
  CHECK(worst < 1.0 * sk.h);
  CHECK(worst > 0.0);

  const Problem p0 = builtin("P0");
  const PathState ps0 = simulate_sde(p0, 0.3, ns, solve_skeleton(p0, 128));
  double x = 0.0;
  for (std::size_t i = 0; i < 128; ++i) {
    x += 0.3 * ns.dB[i];
    CHECK(ps0.X[i + 1] == x);
  }

  CHECK_THROWS_AS((void)simulate_sde(p2, 1.0, ns, sk), InvalidArgument);
  CHECK_THROWS_AS((void)simulate_sde(p2, 0.1, noise(1, 0, 64, 1.0), sk), InvalidArgument);

  const PathState again = simulate_sde(p2, 0.2, ns, sk), twice = simulate_sde(p2, 0.2, ns, sk);
  CHECK(again.X == twice.X);
}

TEST_CASE("simulate_sde reports the failing step") {
  const Problem blow = load_problem(R"js({"label": "blow", "b": "x*x*x", "b1": "3*x*x", "b2": "6*x",
    "sigma": "1", "sigma1": "0", "sigma2": "0", "x0": 0.1, "horizon": 1})js");
  const SkeletonPath sk = solve_skeleton(blow, 16);
  NoiseStream ns = noise(1, 0, 16, 1.0);
  ns.dB[3] = 1e120;
  try {
    (void)simulate_sde(blow, 0.5, ns, sk);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(e.step() >= 3);
  }
}

TEST_CASE("P1 rescaled state has mean zero") {
  const Problem p = builtin("P1");
  const SkeletonPath sk = solve_skeleton(p, 128);
  std::vector<double> v;
  for (std::uint64_t id = 0; id < 10000; ++id) {
    const PathState ps = simulate_sde(p, 0.1, noise(9, id, 128, 1.0), sk);
    v.push_back(rescaled_state(ps, sk, 128));
  }
  const auto s = stats(v);
  CHECK(std::abs(s.mean) < 3.0 * s.se);
}

TEST_CASE("first derivative fields") {
  const Problem p0 = builtin("P0");
  const SkeletonPath s0 = solve_skeleton(p0, 32);
  const PathState ps0 = simulate_sde(p0, 0.25, noise(2, 0, 32, 1.0), s0);
  for (auto m : {FieldMethod::closed_form, FieldMethod::variational}) {
    const DerivativeField d = malliavin_first(ps0, m);
    for (std::size_t t = 0; t <= 32; ++t)
      for (std::size_t r = 0; r <= t; ++r) CHECK(d.d(r, t) == 0.25);
  }

  const Problem p1 = builtin("P1");
  const SkeletonPath s1 = solve_skeleton(p1, 128);
  const PathState ps1 = simulate_sde(p1, 0.1, noise(2, 0, 128, 1.0), s1);
  for (auto m : {FieldMethod::closed_form, FieldMethod::variational}) {
    const DerivativeField d = malliavin_first(ps1, m);
    double worst = 0.0;
    for (std::size_t t = 0; t <= 128; ++t)
      for (std::size_t r = 0; r <= t; ++r)
        worst = std::max(worst, std::abs(d.d(r, t) - 0.1 * std::exp(-static_cast<double>(t - r) / 128.0)));
    CHECK(worst < 0.1 * s1.h);
  }

  // eps = 0 collapses every field
  const PathState flat = simulate_sde(builtin("P3"), 0.0, noise(2, 0, 32, 1.0), solve_skeleton(builtin("P3"), 32));
  const DerivativeField dz = malliavin_first(flat, FieldMethod::closed_form);
  for (std::size_t t = 0; t <= 32; ++t)
    for (std::size_t r = 0; r <= t; ++r) CHECK(dz.d(r, t) == 0.0);
}

TEST_CASE("pathwise first derivative matches finite differences of the scheme") {
  const Problem p = builtin("P3");
  const SkeletonPath sk = solve_skeleton(p, 32);
  NoiseStream ns = noise(4, 2, 32, 1.0);
  const double eps = 0.3;
  const DerivativeField d = malliavin_first(simulate_sde(p, eps, ns, sk), FieldMethod::pathwise);
  const double delta = 1e-6;
  for (std::size_t j : {0u, 7u, 20u, 31u}) {
    NoiseStream up = ns, dn = ns;
    up.dB[j] += delta;
    dn.dB[j] -= delta;
    const PathState a = simulate_sde(p, eps, up, sk), b = simulate_sde(p, eps, dn, sk);
    for (std::size_t t = j + 1; t <= 32; ++t) {
      const double fd = (a.X[t] - b.X[t]) / (2.0 * delta);
      CHECK(d.d(j, t) == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("pathwise second derivative matches finite differences") {
  const Problem p = builtin("P3");
  const SkeletonPath sk = solve_skeleton(p, 16);
  const NoiseStream ns = noise(4, 3, 16, 1.0);
  const double eps = 0.3, delta = 1e-5;
  const PathState ps = simulate_sde(p, eps, ns, sk);
  const DerivativeField d1 = malliavin_first(ps, FieldMethod::pathwise);
  const SecondDerivativeField d2 = malliavin_second(p, ps, d1, 1.0, FieldMethod::pathwise);
  for (std::size_t i : {2u, 9u})
    for (std::size_t j : {2u, 5u, 14u}) {
      NoiseStream up = ns, dn = ns;
      up.dB[j] += delta;
      dn.dB[j] -= delta;
      const auto fa = malliavin_first(simulate_sde(p, eps, up, sk), FieldMethod::pathwise);
      const auto fb = malliavin_first(simulate_sde(p, eps, dn, sk), FieldMethod::pathwise);
      const double fd = (fa.d(i, 16) - fb.d(i, 16)) / (2.0 * delta);
      CAPTURE(i);
      CAPTURE(j);
      CHECK(d2(i, j) == doctest::Approx(fd).epsilon(1e-6).scale(1e-9));
    }
  CHECK(d2.symmetry_defect() == 0.0);
}

TEST_CASE("closed form and variational fields converge at order one on P3") {
  const Problem p = builtin("P3");
  double gap[2] = {0.0, 0.0};
  const std::size_t sizes[2] = {128, 256};
  for (int k = 0; k < 2; ++k) {
    const SkeletonPath sk = solve_skeleton(p, sizes[k]);
    for (std::uint64_t id = 0; id < 20; ++id) {
      const PathState ps = simulate_sde(p, 0.2, noise(6, id, sizes[k], 1.0), sk);
      const auto a = malliavin_first(ps, FieldMethod::closed_form), b = malliavin_first(ps, FieldMethod::variational);
      double g = 0.0;
      for (std::size_t t = 0; t <= sizes[k]; ++t)
        for (std::size_t r = 0; r <= t; ++r) g = std::max(g, std::abs(a.d(r, t) - b.d(r, t)));
      gap[k] += g / 20.0;
    }
  }
  const double ratio = gap[0] / gap[1];
  CHECK(ratio > 1.5);
  CHECK(ratio < 2.5);
}

TEST_CASE("second derivative fields") {
  const Problem p1 = builtin("P1");
  const SkeletonPath s1 = solve_skeleton(p1, 32);
  const PathState ps1 = simulate_sde(p1, 0.2, noise(1, 1, 32, 1.0), s1);
  const auto d1 = malliavin_first(ps1, FieldMethod::closed_form);
  const auto z = malliavin_second(p1, ps1, d1, 1.0);
  for (double v : z.values) CHECK(v == 0.0);

  const Problem p2 = builtin("P2");
  const SkeletonPath s2 = solve_skeleton(p2, 64);
  const PathState ps2 = simulate_sde(p2, 0.1, noise(1, 1, 64, 1.0), s2);
  const auto f2 = malliavin_first(ps2, FieldMethod::closed_form);
  const auto sec = malliavin_second(p2, ps2, f2, 1.0);
  CHECK(sec.reduced);
  CHECK(sec.symmetry_defect() < 1e-12);
  // variational Euler entry vs reduced closed form: two O(h) discretizations
  CHECK(second_derivative_entry(p2, ps2, f2, 10, 30, 64) == doctest::Approx(sec(10, 30)).epsilon(0.05));
  CHECK_THROWS_AS((void)malliavin_second(p2, ps2, f2, 0.3), InvalidArgument);
  CHECK_THROWS_AS((void)malliavin_second(p2, ps2, f2, 1.0, FieldMethod::pathwise), InvalidArgument);
}

TEST_CASE("derivative moments scale like eps and eps^2") {
  const Problem p3 = builtin("P3"), p2 = builtin("P2");
  const SkeletonPath s3 = solve_skeleton(p3, 64), s2 = solve_skeleton(p2, 64);
  std::vector<RatePoint> first, second;
  for (double eps : {0.4, 0.2, 0.1, 0.05}) {
    double m1 = 0.0, m2 = 0.0;
    const int paths = 1000;
    for (int id = 0; id < paths; ++id) {
      const NoiseStream ns = noise(8, id, 64, 1.0);
      const PathState a = simulate_sde(p3, eps, ns, s3);
      m1 += std::pow(malliavin_first(a, FieldMethod::closed_form).d(32, 64), 4) / paths;
      const PathState b = simulate_sde(p2, eps, ns, s2);
      const auto d = malliavin_first(b, FieldMethod::closed_form);
      m2 += std::pow(second_derivative_entry(p2, b, d, 32, 32, 64), 4) / paths;
    }
    first.push_back({eps, std::pow(m1, 0.25), 0.0});
    second.push_back({eps, std::pow(m2, 0.25), 0.0});
  }
  CHECK(rate_fit(first).slope == doctest::Approx(1.0).epsilon(0.2));
  CHECK(std::abs(rate_fit(second).slope - 2.0) < 0.3);
}

TEST_CASE("Z is a martingale: branch average at a node is one") {
  const Problem p = builtin("P3");
  const std::size_t n = 64, r = 20;
  const SkeletonPath sk = solve_skeleton(p, n);
  const NoiseStream base = noise(10, 3, n, 1.0);
  std::vector<double> z;
  for (std::uint32_t c = 0; c < 256; ++c) {
    NoiseStream ns = base;
    fill_increments({10, 3, 1 + c}, sk.h, std::span<double>(ns.dB).subspan(r));
    z.push_back(simulate_sde(p, 0.4, ns, sk).z(r, n));
  }
  const auto s = stats(z);
  CHECK(std::abs(s.mean - 1.0) < 5.0 * s.se);
}

TEST_CASE("limit pair") {
  const Problem p0 = builtin("P0");
  const SkeletonPath s0 = solve_skeleton(p0, 32);
  const NoiseStream ns = noise(3, 3, 32, 1.0);
  const LimitPair lp0 = simulate_limit_pair(p0, ns, s0);
  double b = 0.0;
  for (std::size_t k = 0; k < 32; ++k) {
    b += ns.dB[k];
    CHECK(lp0.U[k + 1] == doctest::Approx(b).epsilon(1e-14));
    CHECK(lp0.V[k + 1] == 0.0);
  }
  for (double d : lp0.du_column(32)) CHECK(d == 1.0);
  CHECK(skorokhod_lower_functional(lp0, 32) == 0.0);

  const Problem p1 = builtin("P1");
  const SkeletonPath s1 = solve_skeleton(p1, 256);
  const auto model = limit_model(p1, s1);
  std::vector<double> u;
  for (std::uint64_t id = 0; id < 100000; ++id) {
    const LimitPair lp = simulate_limit_pair(model, noise(12, id, 256, 1.0));
    u.push_back(lp.U[256]);
    if (id < 50) CHECK(skorokhod_lower_functional(lp, 256) == 0.0);
  }
  const double beta2 = (1.0 - std::exp(-2.0)) / 2.0;
  CHECK(std::abs(stats(u).var - beta2) < 3.0 * snfl::test::variance_se(u));

  const Problem p2 = builtin("P2");
  const SkeletonPath s2 = solve_skeleton(p2, 128);
  const auto m2 = limit_model(p2, s2);
  std::vector<double> u2, dv_gap;
  for (std::uint64_t id = 0; id < 20000; ++id) {
    const LimitPair lp = simulate_limit_pair(m2, noise(12, id, 128, 1.0));
    u2.push_back(lp.U[128]);
    if (id < 20) {
      const auto a = lp.dv_column(128, FieldMethod::pathwise), c = lp.dv_column(128, FieldMethod::closed_form);
      const LowerTriangle f = lp.dv_field();
      for (std::size_t r = 0; r < 128; ++r) {
        CHECK(a[r] == doctest::Approx(f(r, 128)).epsilon(1e-10).scale(1e-12));
        dv_gap.push_back(std::abs(a[r] - c[r]));
      }
    }
  }
  const auto s = stats(u2);
  CHECK(std::abs(s.mean) < 3.0 * s.se);
  double worst = 0.0;
  for (double g : dv_gap) worst = std::max(worst, g);
  CHECK(worst < 0.05);
}

TEST_CASE("path state dump round-trips") {
  const Problem p = builtin("P3");
  const SkeletonPath sk = solve_skeleton(p, 16);
  const PathState ps = simulate_sde(p, 0.2, noise(5, 9, 16, 1.0), sk);
  std::stringstream ss;
  write_path_state(ps, ss);
  CHECK(ss.str().rfind("SNFLPATH", 0) == 0);
  const PathState back = read_path_state(ss);
  CHECK(back.X == ps.X);
  CHECK(back.dB == ps.dB);
  CHECK(back.eps == ps.eps);
  CHECK(back.h == ps.h);
  CHECK(back.path_id == 9);
  CHECK(back.sigma1 == ps.sigma1);
  CHECK(back.b1_cum == ps.b1_cum);
  std::stringstream bad("NOTAPATH");
  CHECK_THROWS_AS((void)read_path_state(bad), Error);
}
