#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "snfl/problem.hpp"

namespace snfl {

/// Noiseless trajectory x' = b(t, x) on a uniform grid of n steps.
struct SkeletonPath {
  std::size_t n = 0;
  double T = 0.0;
  double h = 0.0;
  std::vector<double> t;         ///< n+1 grid times
  std::vector<double> x;         ///< RK4 states
  std::vector<double> b1;        ///< b'(t_i, x_i)
  std::vector<double> exponent;  ///< fourth-order cumulative integral of b' along x
  std::vector<double> y;         ///< cumulative integral of f(s, x_s); empty without f
  /// Euler iterates of the same ODE (the eps = 0 member of the SDE scheme).
  /// Fluctuations of simulated paths are centered on these so that the
  /// O(h) scheme-vs-RK4 gap does not get divided by eps.
  std::vector<double> euler_x;

  /// Index of grid time t; throws InvalidArgument when t is off-grid.
  std::size_t index_of(double time) const;
};

/// Throws InvalidArgument unless n >= 2 is a power of two; NumericalError
/// naming the step on a non-finite state.
SkeletonPath solve_skeleton(const Problem& p, std::size_t n);

/// beta_t^2 = int_0^t sigma^2(r, x_r) exp(2 int_r^t b') dr.
double beta_variance(const Problem& p, const SkeletonPath& sk, double t);

/// gamma_t^2 = int_0^t ( int_r^t f'(s, x_s) sigma(r, x_r) exp(int_r^s b') ds )^2 dr.
double gamma_variance(const Problem& p, const SkeletonPath& sk, double t);

struct VarianceCurve {
  std::vector<double> t;
  std::vector<double> value;
  std::string rule = "simpson";
  std::size_t n = 0;
};

VarianceCurve beta_curve(const Problem& p, const SkeletonPath& sk);
VarianceCurve gamma_curve(const Problem& p, const SkeletonPath& sk);

/// CSV with a `#schema=` header line and columns t,value.
void write_csv(const VarianceCurve& c, std::ostream& os);

}  // namespace snfl
