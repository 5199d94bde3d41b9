#include "snfl/skeleton.hpp"

#include <cmath>
#include <ostream>

#include "snfl/error.hpp"
#include "snfl/quadrature.hpp"

namespace snfl {

std::size_t SkeletonPath::index_of(double time) const {
  const double k = time / h;
  const double r = std::round(k);
  if (!(time >= 0.0) || r > static_cast<double>(n) || std::abs(k - r) > 1e-9 * std::max(1.0, k))
    throw InvalidArgument("time " + std::to_string(time) + " is not on the grid (h=" + std::to_string(h) + ")");
  return static_cast<std::size_t>(r);
}

SkeletonPath solve_skeleton(const Problem& p, std::size_t n) {
  if (n < 2 || (n & (n - 1)) != 0) throw InvalidArgument("skeleton steps must be a power of two >= 2");
  SkeletonPath sk;
  sk.n = n;
  sk.T = p.horizon;
  sk.h = p.horizon / static_cast<double>(n);
  const double h = sk.h;
  sk.t.resize(n + 1);
  sk.x.resize(n + 1);
  sk.euler_x.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) sk.t[i] = h * static_cast<double>(i);
  sk.x[0] = sk.euler_x[0] = p.x0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = sk.t[i], x = sk.x[i];
    const double k1 = p.b(t, x);
    const double k2 = p.b(t + 0.5 * h, x + 0.5 * h * k1);
    const double k3 = p.b(t + 0.5 * h, x + 0.5 * h * k2);
    const double k4 = p.b(t + h, x + h * k3);
    sk.x[i + 1] = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    sk.euler_x[i + 1] = sk.euler_x[i] + h * p.b(t, sk.euler_x[i]);
    if (!std::isfinite(sk.x[i + 1]) || !std::isfinite(sk.euler_x[i + 1]))
      throw NumericalError("skeleton state became non-finite", i + 1);
  }
  sk.b1.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) sk.b1[i] = p.b1(sk.t[i], sk.x[i]);
  sk.exponent = cumulative_integral(sk.b1, h);
  if (p.has_f) {
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fv[i] = p.f(sk.t[i], sk.x[i]);
    sk.y = cumulative_integral(fv, h);
  }
  return sk;
}

namespace {

double beta_at(const Problem& p, const SkeletonPath& sk, std::size_t m) {
  if (m == 0) return 0.0;
  std::vector<double> g(m + 1);
  for (std::size_t i = 0; i <= m; ++i) {
    const double s = p.sigma(sk.t[i], sk.x[i]);
    g[i] = s * s * std::exp(2.0 * (sk.exponent[m] - sk.exponent[i]));
  }
  return integrate(g, sk.h);
}

std::vector<double> gamma_inner_cumulative(const Problem& p, const SkeletonPath& sk) {
  std::vector<double> g(sk.n + 1);
  for (std::size_t i = 0; i <= sk.n; ++i) g[i] = p.f1(sk.t[i], sk.x[i]) * std::exp(sk.exponent[i]);
  return cumulative_integral(g, sk.h);
}

double gamma_at(const Problem& p, const SkeletonPath& sk, const std::vector<double>& c, std::size_t m) {
  if (m == 0) return 0.0;
  std::vector<double> g(m + 1);
  for (std::size_t r = 0; r <= m; ++r) {
    const double inner = p.sigma(sk.t[r], sk.x[r]) * std::exp(-sk.exponent[r]) * (c[m] - c[r]);
    g[r] = inner * inner;
  }
  return integrate(g, sk.h);
}

void require_f(const Problem& p) {
  if (!p.has_f) throw InvalidArgument("problem " + p.label + " has no observable f");
}

}  // namespace

double beta_variance(const Problem& p, const SkeletonPath& sk, double t) { return beta_at(p, sk, sk.index_of(t)); }

double gamma_variance(const Problem& p, const SkeletonPath& sk, double t) {
  require_f(p);
  const std::size_t m = sk.index_of(t);
  return gamma_at(p, sk, gamma_inner_cumulative(p, sk), m);
}

VarianceCurve beta_curve(const Problem& p, const SkeletonPath& sk) {
  VarianceCurve c;
  c.n = sk.n;
  c.t = sk.t;
  c.value.resize(sk.n + 1);
  for (std::size_t m = 0; m <= sk.n; ++m) c.value[m] = beta_at(p, sk, m);
  return c;
}

VarianceCurve gamma_curve(const Problem& p, const SkeletonPath& sk) {
  require_f(p);
  VarianceCurve c;
  c.n = sk.n;
  c.t = sk.t;
  const auto inner = gamma_inner_cumulative(p, sk);
  c.value.resize(sk.n + 1);
  for (std::size_t m = 0; m <= sk.n; ++m) c.value[m] = gamma_at(p, sk, inner, m);
  return c;
}

void write_csv(const VarianceCurve& c, std::ostream& os) {
  os << "#schema=variance_curve/1 rule=" << c.rule << " n=" << c.n << "\n";
  os << "t,value\n";
  char buf[64];
  for (std::size_t i = 0; i < c.t.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", c.t[i], c.value[i]);
    os << buf;
  }
}

}  // namespace snfl
