#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace snfl {

enum class Rule { trapezoid, simpson };

std::string_view to_string(Rule r) noexcept;

/// Composite rule over equally spaced samples. Simpson requires an even
/// number of intervals; throws InvalidArgument otherwise or with < 2 samples.
double quadrature(std::span<const double> samples, double h, Rule rule);

/// Fourth-order rule for any sample count >= 1: composite Simpson, with a
/// 3/8 panel at the front when the interval count is odd. One interval
/// falls back to the trapezoid. A single sample integrates to 0.
double integrate(std::span<const double> samples, double h);

/// Weights w with integrate(f) == sum w_i f_i.
std::vector<double> integration_weights(std::size_t intervals, double h);

/// out[i] approximates the integral from sample 0 to sample i, fourth order.
std::vector<double> cumulative_integral(std::span<const double> samples, double h);

}  // namespace snfl
