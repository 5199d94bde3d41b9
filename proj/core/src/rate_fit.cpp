#include "snfl/rate_fit.hpp"

#include <cmath>

#include "snfl/error.hpp"

namespace snfl {

LinearFit ols(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw InvalidArgument("ols: need >= 2 paired points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0)) throw InvalidArgument("ols: x values are all equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - f.intercept - f.slope * x[i];
    sse += e * e;
  }
  f.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
  f.slope_se = n > 2 ? std::sqrt(sse / (n - 2) / sxx) : 0.0;
  return f;
}

RateFit rate_fit(std::span<const RatePoint> points) {
  RateFit r;
  for (const auto& p : points) {
    if (p.value > 0.0 && p.eps > 0.0 && std::isfinite(p.value) && !(p.value < kNoiseFloor * p.std_error))
      r.used.push_back(p);
    else
      r.excluded.push_back(p);
  }
  if (r.used.size() < 3)
    throw InsufficientSignal("insufficient signal: " + std::to_string(r.used.size()) +
                             " points above the noise floor (need 3)");
  std::vector<double> lx, ly;
  for (const auto& p : r.used) {
    lx.push_back(std::log(p.eps));
    ly.push_back(std::log(p.value));
  }
  const LinearFit f = ols(lx, ly);
  r.slope = f.slope;
  r.intercept = f.intercept;
  r.r2 = f.r2;
  r.slope_se = f.slope_se;
  return r;
}

}  // namespace snfl
