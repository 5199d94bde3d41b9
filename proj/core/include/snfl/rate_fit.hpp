#pragma once

#include <span>
#include <vector>

namespace snfl {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double slope_se = 0.0;
};

/// Ordinary least squares y = intercept + slope x. Needs >= 2 points with
/// distinct x; slope_se is 0 for exactly two points.
LinearFit ols(std::span<const double> x, std::span<const double> y);

struct RatePoint {
  double eps = 0.0;
  double value = 0.0;
  double std_error = 0.0;
};

/// Log-log fit of value against eps.
struct RateFit {
  std::vector<RatePoint> used;
  std::vector<RatePoint> excluded;  ///< value < 3 * std_error (noise floor)
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double slope_se = 0.0;
};

/// Noise-floor multiple: points below this many standard errors are dropped.
inline constexpr double kNoiseFloor = 3.0;

/// Throws InsufficientSignal("insufficient signal ...") with < 3 usable points.
RateFit rate_fit(std::span<const RatePoint> points);

}  // namespace snfl
