#pragma once

#include <span>
#include <vector>

namespace snfl {

/// 0.9 * min(sd, IQR/1.34) * n^{-1/5}. Throws InvalidArgument on a
/// degenerate sample (zero spread).
double silverman_bandwidth(std::span<const double> x);

/// Sample quantile by linear interpolation of the sorted values.
double quantile_sorted(std::span<const double> sorted, double q);

/// Gaussian-kernel local-linear regression of y on x evaluated at knots.
/// Reproduces affine relationships exactly; falls back to the local
/// constant fit where the local design is singular. Samples farther than
/// 8 bandwidths from a knot are ignored.
std::vector<double> local_linear(std::span<const double> x, std::span<const double> y, std::span<const double> knots,
                                 double bandwidth);

}  // namespace snfl
