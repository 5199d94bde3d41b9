#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace snfl::test {

struct Stats {
  double mean = 0.0, var = 0.0, se = 0.0;
};

inline Stats stats(std::span<const double> v) {
  Stats s;
  const double n = static_cast<double>(v.size());
  for (double x : v) s.mean += x;
  s.mean /= n;
  for (double x : v) s.var += (x - s.mean) * (x - s.mean);
  s.var /= (n - 1.0);
  s.se = std::sqrt(s.var / n);
  return s;
}

// standard error of the sample variance from the fourth central moment
inline double variance_se(std::span<const double> v) {
  const Stats s = stats(v);
  double m4 = 0.0;
  for (double x : v) m4 += std::pow(x - s.mean, 4);
  m4 /= static_cast<double>(v.size());
  return std::sqrt((m4 - s.var * s.var) / static_cast<double>(v.size()));
}

}  // namespace snfl::test
