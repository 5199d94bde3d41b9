#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "snfl/functionals.hpp"

namespace snfl {

enum class ScoreMethod { regression, kde, exact };

const char* to_string(ScoreMethod m) noexcept;

/// Score estimate rho(x) tabulated on knots, linear in between. Evaluation
/// outside [knots.front(), knots.back()] clamps; use in_range to filter.
struct ScoreModel {
  ScoreMethod method = ScoreMethod::regression;
  std::vector<double> knots;
  std::vector<double> values;
  double bandwidth = 0.0;
  std::size_t effective_n = 0;
  double excluded_mass = 0.0;  ///< sample fraction outside the knot range

  double operator()(double x) const noexcept;
  bool in_range(double x) const noexcept { return x >= knots.front() && x <= knots.back(); }
};

struct ScoreOptions {
  std::size_t knots = 128;
  double bandwidth_multiplier = 1.0;
  double lower_quantile = 0.005;
  double upper_quantile = 0.995;
};

/// rho(x) = -E[(F - mean F)/Theta + <DTheta,u>/Theta^2 | F = x], fitted by
/// local-linear Gaussian kernel regression on quantile knots. Needs >= 1000
/// samples with Theta > 0 and nondegenerate F.
ScoreModel score_by_regression(std::span<const MalliavinSample> ms, const ScoreOptions& opt = {});

/// rho = p'/p from a Gaussian KDE; knots with p below 1e-12 are dropped.
ScoreModel score_by_kde(std::span<const double> samples, const ScoreOptions& opt = {});

/// Tabulates a known score on `count` knots spanning [lo, hi].
ScoreModel score_from_function(const std::function<double(double)>& rho, double lo, double hi, std::size_t count);

struct FisherEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  double outside_fraction = 0.0;
  bool warning = false;  ///< more than 5% of samples outside the knot range
};

/// Mean of (rho(F) + (F - mu)/var)^2 over samples inside the knot range;
/// standard error from 32 contiguous batches.
FisherEstimate fisher_distance(const ScoreModel& sm, std::span<const double> samples, double mu, double var);

/// Regression score fitted on all samples, Fisher distance evaluated on
/// them. The standard error comes from refitting the score on up to 32
/// contiguous batches (at least 1000 samples each), so it includes the
/// score-fit noise that a fixed-model batch error would miss.
FisherEstimate fisher_by_regression(std::span<const MalliavinSample> ms, double mu, double var,
                                    const ScoreOptions& opt = {}, ScoreModel* fitted = nullptr);

/// KDE counterpart. The estimate cross-fits two half-sample scores so the
/// KDE noise does not inflate it; it can come out slightly negative near a
/// null. Needs >= 2000 samples; batch-refit standard error as above.
FisherEstimate fisher_by_kde(std::span<const double> samples, double mu, double var, const ScoreOptions& opt = {},
                             ScoreModel* fitted = nullptr);

struct KolmogorovEstimate {
  double estimate = 0.0;
  double band = 0.0;  ///< DKW 95% half-width sqrt(ln(40)/(2n))
};

KolmogorovEstimate kolmogorov_distance(std::span<const double> samples, double mu, double var);

double dkw_band(std::size_t n, double alpha = 0.05);

/// (mu1-mu2)^2/var2^2 + var1 (1/var2 - 1/var1)^2.
double gaussian_fisher_closed(double mu1, double var1, double mu2, double var2);

struct DistanceReport {
  double eps = 0.0;
  double t = 0.0;
  std::size_t n = 0;
  double mu = 0.0;
  double var = 0.0;
  double fisher = 0.0;
  double fisher_se = 0.0;
  double kolmogorov = 0.0;
  double kolmogorov_band = 0.0;
  std::string method = "regression";
  double bandwidth = 0.0;
  double outside_fraction = 0.0;
  bool warning = false;
};

std::string to_json(const DistanceReport& r);

struct PinskerVerdict {
  bool pass = true;
  double slack = 0.0;      ///< sqrt(fisher) - kolmogorov
  double allowance = 0.0;  ///< DKW band plus the 95% error of sqrt(fisher)
};

/// d_Kol <= sqrt(I) + allowance.
PinskerVerdict pinsker_check(const DistanceReport& r);

}  // namespace snfl
