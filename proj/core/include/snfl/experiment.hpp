#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "snfl/distance.hpp"
#include "snfl/functionals.hpp"
#include "snfl/problem.hpp"
#include "snfl/rate_fit.hpp"

namespace snfl {

/// {0.4, 0.283, 0.2, 0.141, 0.1, 0.0707, 0.05}
std::vector<double> default_eps_grid();

struct EstimatorSettings {
  std::size_t knots = 128;
  double bandwidth_multiplier = 1.0;
  std::size_t bins = 64;
  std::size_t min_count = 50;
  std::size_t pilot = 16384;
};

struct SweepPlan {
  std::string problem = "P2_sine_drift";  ///< builtin name, ignored when config is set
  std::string config;                     ///< optional configuration file
  double t = 1.0;
  std::vector<double> eps = default_eps_grid();
  std::size_t paths = 100000;
  std::size_t mesh = 128;
  std::uint64_t seed = 1;
  Functional functional = Functional::terminal_state;
  double p0 = 2.0;  ///< volterra exponent
  EstimatorSettings estimator;

  /// Throws InvalidArgument: eps strictly decreasing in (0,1), paths >= 1000,
  /// mesh a power of two, t in (0, T].
  void validate() const;
};

std::string to_json(const SweepPlan& plan);
/// Missing keys keep their defaults; unknown keys are rejected.
SweepPlan plan_from_json(std::string_view text);

Problem resolve_problem(const SweepPlan& plan);

/// Every ingredient of the Fisher bound at one (eps, t).
struct BoundComponents {
  double eps = 0.0;
  double t = 0.0;
  double target_var = 0.0;  ///< beta_t^2 or gamma_t^2
  double mean = 0.0, mean_se = 0.0;  ///< E F (limit control variate)
  double mean_sq = 0.0, mean_sq_se = 0.0;
  double var = 0.0, var_se = 0.0;  ///< Var F (limit control variate)
  double var_gap_sq = 0.0, var_gap_sq_se = 0.0;
  double theta_mean = 0.0, theta_mean_se = 0.0;
  double sample_var = 0.0, sample_var_se = 0.0;  ///< plain estimator
  double dtheta4_root = 0.0, dtheta4_root_se = 0.0;  ///< sqrt(E ||DTheta||^4)
  double theta_neg8 = 0.0, theta_neg16 = 0.0, u8 = 0.0;
  double A = 0.0, C = 0.0;
  double term_mean = 0.0, term_var = 0.0, term_dtheta = 0.0;
  double bound = 0.0;  ///< three-term sum with the absolute constant set to 1
  double fisher = 0.0, fisher_se = 0.0;
  bool envelope_flag = false;  ///< fisher > 50 * bound
};

struct SweepPoint {
  double eps = 0.0;
  bool ok = false;
  std::string error;
  DistanceReport report;
  BoundComponents components;
};

struct NamedFit {
  std::string quantity;
  std::optional<RateFit> fit;
  std::string error;  ///< set when the fit failed (e.g. insufficient signal)
};

struct SweepResult {
  SweepPlan plan;
  std::string label;
  double target_var = 0.0;
  std::vector<SweepPoint> points;
  std::vector<NamedFit> fits;

  const NamedFit* fit(std::string_view quantity) const;
};

/// Runs one ensemble and derives the report and bound components.
SweepPoint run_point(const Problem& p, const SweepPlan& plan, double eps);

/// One point per eps with common random numbers; failed points are
/// recorded and skipped. Fits fisher, kolmogorov and component slopes.
SweepResult sweep(const SweepPlan& plan);
SweepResult sweep(const Problem& p, const SweepPlan& plan);

/// Same pipeline for Y~ against N(0, gamma_t^2).
SweepResult additive_sweep(SweepPlan plan);
SweepResult additive_sweep(const Problem& p, SweepPlan plan);

/// plan.eps must hold exactly one value.
BoundComponents bound_components(const Problem& p, const SweepPlan& plan);

/// Asymptotic sd of the null Kolmogorov statistic times sqrt(n); used as
/// the Kolmogorov standard error for noise-floor decisions.
inline constexpr double kKolmogorovNullSd = 0.26;

struct LowerComparison {
  double eps = 0.0;
  double ratio = 0.0;  ///< fisher / eps^2
  double ratio_se = 0.0;
  bool consistent = true;  ///< ratio >= lower - 2 combined se
};

struct LowerBoundResult {
  double t = 0.0;
  std::size_t paths = 0;
  double beta2 = 0.0;
  double mean_abs_conditional = 0.0;  ///< E|E[delta | U]|
  double lower = 0.0, lower_se = 0.0;
  double mean_delta = 0.0, mean_delta_se = 0.0;
  std::vector<LowerComparison> comparison;
};

/// (E|E[delta(V DU)|U_t]|)^2 / (4 beta_t^4) from a limit-pair ensemble.
/// E[.|U] by local-linear regression on quantile knots; the standard error
/// comes from refitting on 16 disjoint groups.
LowerBoundResult lower_bound_experiment(const Problem& p, double t, std::size_t paths, std::size_t mesh,
                                        std::uint64_t seed, const SweepResult* sweep = nullptr);

}  // namespace snfl
