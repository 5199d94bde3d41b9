#include "snfl/quadrature.hpp"

#include "snfl/error.hpp"

namespace snfl {

std::string_view to_string(Rule r) noexcept { return r == Rule::simpson ? "simpson" : "trapezoid"; }

double quadrature(std::span<const double> f, double h, Rule rule) {
  if (f.size() < 2) throw InvalidArgument("quadrature needs at least 2 samples");
  const std::size_t n = f.size() - 1;
  if (rule == Rule::trapezoid) {
    double s = 0.5 * (f[0] + f[n]);
    for (std::size_t i = 1; i < n; ++i) s += f[i];
    return s * h;
  }
  if (n % 2 != 0) throw InvalidArgument("simpson rule requires an even interval count, got " + std::to_string(n));
  double odd = 0.0, even = 0.0;
  for (std::size_t i = 1; i < n; i += 2) odd += f[i];
  for (std::size_t i = 2; i < n; i += 2) even += f[i];
  return h / 3.0 * (f[0] + f[n] + 4.0 * odd + 2.0 * even);
}

std::vector<double> integration_weights(std::size_t n, double h) {
  std::vector<double> w(n + 1, 0.0);
  if (n == 0) return w;
  if (n == 1) {
    w[0] = w[1] = 0.5 * h;
    return w;
  }
  std::size_t start = 0;
  if (n % 2 == 1) {
    // 3/8 panel on [0, 3h]
    w[0] += 3.0 * h / 8.0;
    w[1] += 9.0 * h / 8.0;
    w[2] += 9.0 * h / 8.0;
    w[3] += 3.0 * h / 8.0;
    start = 3;
  }
  for (std::size_t i = start; i + 2 <= n; i += 2) {
    w[i] += h / 3.0;
    w[i + 1] += 4.0 * h / 3.0;
    w[i + 2] += h / 3.0;
  }
  return w;
}

double integrate(std::span<const double> f, double h) {
  if (f.size() <= 1) return 0.0;
  const auto w = integration_weights(f.size() - 1, h);
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * f[i];
  return s;
}

std::vector<double> cumulative_integral(std::span<const double> f, double h) {
  const std::size_t m = f.size();
  std::vector<double> c(m, 0.0);
  if (m <= 1) return c;
  if (m == 2) {
    c[1] = 0.5 * h * (f[0] + f[1]);
    return c;
  }
  if (m == 3) {
    c[1] = h * (5.0 * f[0] + 8.0 * f[1] - f[2]) / 12.0;
  } else {
    c[1] = h * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) / 24.0;
  }
  for (std::size_t i = 2; i < m; ++i) c[i] = c[i - 2] + h / 3.0 * (f[i - 2] + 4.0 * f[i - 1] + f[i]);
  return c;
}

}  // namespace snfl
