#include "snfl/kernel_regression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "snfl/error.hpp"

namespace snfl {

double quantile_sorted(std::span<const double> s, double q) {
  if (s.empty()) throw InvalidArgument("quantile of empty sample");
  const double pos = q * static_cast<double>(s.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return s[lo] + w * (s[hi] - s[lo]);
}

double silverman_bandwidth(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) throw InvalidArgument("bandwidth needs at least 2 samples");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const double iqr = quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) throw InvalidArgument("degenerate sample: zero spread");
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

std::vector<double> local_linear(std::span<const double> x, std::span<const double> y, std::span<const double> knots,
                                 double bw) {
  if (x.size() != y.size()) throw InvalidArgument("local_linear: size mismatch");
  if (!(bw > 0.0)) throw InvalidArgument("local_linear: bandwidth must be positive");
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[order[i]];
    ys[i] = y[order[i]];
  }
  std::vector<double> out(knots.size());
  const double cut = 8.0 * bw;
  for (std::size_t k = 0; k < knots.size(); ++k) {
    const double c = knots[k];
    const auto lo = std::lower_bound(xs.begin(), xs.end(), c - cut) - xs.begin();
    const auto hi = std::upper_bound(xs.begin(), xs.end(), c + cut) - xs.begin();
    double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
    for (auto i = lo; i < hi; ++i) {
      const double d = xs[i] - c;
      const double z = d / bw;
      const double w = std::exp(-0.5 * z * z);
      s0 += w;
      s1 += w * d;
      s2 += w * d * d;
      t0 += w * ys[i];
      t1 += w * d * ys[i];
    }
    const double det = s0 * s2 - s1 * s1;
    if (s0 <= 0.0) {
      out[k] = 0.0;
    } else if (det > 1e-10 * s0 * s2) {
      out[k] = (s2 * t0 - s1 * t1) / det;
    } else {
      out[k] = t0 / s0;
    }
  }
  return out;
}

}  // namespace snfl
