#include "snfl/distance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "json.hpp"
#include "snfl/error.hpp"
#include "snfl/kernel_regression.hpp"

namespace snfl {

const char* to_string(ScoreMethod m) noexcept {
  switch (m) {
    case ScoreMethod::regression: return "regression";
    case ScoreMethod::kde: return "kde";
    case ScoreMethod::exact: return "exact";
  }
  return "?";
}

double ScoreModel::operator()(double x) const noexcept {
  if (knots.size() == 1) return values[0];
  if (x <= knots.front()) return values.front();
  if (x >= knots.back()) return values.back();
  const auto it = std::upper_bound(knots.begin(), knots.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - knots.begin());
  const std::size_t lo = hi - 1;
  const double w = (x - knots[lo]) / (knots[hi] - knots[lo]);
  return values[lo] + w * (values[hi] - values[lo]);
}

namespace {

std::vector<double> quantile_knots(std::vector<double> sorted_copy, const ScoreOptions& opt) {
  if (opt.knots < 2) throw InvalidArgument("score model needs at least 2 knots");
  std::vector<double> k(opt.knots);
  for (std::size_t j = 0; j < opt.knots; ++j) {
    const double q = opt.lower_quantile + (opt.upper_quantile - opt.lower_quantile) * j / (opt.knots - 1);
    k[j] = quantile_sorted(sorted_copy, q);
  }
  // ties (discrete samples) would break interpolation
  k.erase(std::unique(k.begin(), k.end()), k.end());
  if (k.size() < 2) throw InvalidArgument("degenerate sample: knots collapse");
  return k;
}

double excluded(std::span<const double> x, double lo, double hi) {
  std::size_t out = 0;
  for (double v : x)
    if (v < lo || v > hi) ++out;
  return static_cast<double>(out) / static_cast<double>(x.size());
}

}  // namespace

ScoreModel score_by_regression(std::span<const MalliavinSample> ms, const ScoreOptions& opt) {
  const std::size_t n = ms.size();
  if (n < 1000) throw InvalidArgument("score_by_regression needs at least 1000 samples");
  std::vector<double> F(n), R(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += ms[i].F;
  mean /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double th = ms[i].theta;
    if (!(th > 0.0)) throw InvalidArgument("score_by_regression: Theta <= 0 at path " + std::to_string(ms[i].path_id));
    F[i] = ms[i].F;
    R[i] = (ms[i].F - mean) / th + ms[i].dtheta_u / (th * th);
  }
  const double bw = silverman_bandwidth(F) * opt.bandwidth_multiplier;
  std::vector<double> sorted = F;
  std::sort(sorted.begin(), sorted.end());
  ScoreModel sm;
  sm.method = ScoreMethod::regression;
  sm.knots = quantile_knots(sorted, opt);
  sm.values = local_linear(F, R, sm.knots, bw);
  for (double& v : sm.values) v = -v;
  sm.bandwidth = bw;
  sm.effective_n = n;
  sm.excluded_mass = excluded(F, sm.knots.front(), sm.knots.back());
  return sm;
}

ScoreModel score_by_kde(std::span<const double> x, const ScoreOptions& opt) {
  const std::size_t n = x.size();
  if (n < 1000) throw InvalidArgument("score_by_kde needs at least 1000 samples");
  const double bw = silverman_bandwidth(x) * opt.bandwidth_multiplier;
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const auto knots = quantile_knots(sorted, opt);
  ScoreModel sm;
  sm.method = ScoreMethod::kde;
  sm.bandwidth = bw;
  const double cut = 8.0 * bw;
  const double norm = 1.0 / (static_cast<double>(n) * bw * std::sqrt(2.0 * std::numbers::pi));
  for (double c : knots) {
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), c - cut);
    const auto hi = std::upper_bound(sorted.begin(), sorted.end(), c + cut);
    double p = 0.0, dp = 0.0;
    for (auto it = lo; it != hi; ++it) {
      const double z = (c - *it) / bw;
      const double k = std::exp(-0.5 * z * z);
      p += k;
      dp -= z * k;
    }
    p *= norm;
    dp *= norm / bw;
    if (p < 1e-12) continue;
    sm.knots.push_back(c);
    sm.values.push_back(dp / p);
  }
  if (sm.knots.size() < 2) throw InvalidArgument("score_by_kde: density vanished on all knots");
  sm.effective_n = n;
  sm.excluded_mass = excluded(x, sm.knots.front(), sm.knots.back());
  return sm;
}

ScoreModel score_from_function(const std::function<double(double)>& rho, double lo, double hi, std::size_t count) {
  if (count < 2 || !(hi > lo)) throw InvalidArgument("score_from_function: need count >= 2 and hi > lo");
  ScoreModel sm;
  sm.method = ScoreMethod::exact;
  sm.knots.resize(count);
  sm.values.resize(count);
  for (std::size_t j = 0; j < count; ++j) {
    const double x = j + 1 == count ? hi : lo + (hi - lo) * j / (count - 1);
    sm.knots[j] = x;
    sm.values[j] = rho(x);
  }
  return sm;
}

FisherEstimate fisher_distance(const ScoreModel& sm, std::span<const double> samples, double mu, double var) {
  if (!(var > 0.0)) throw InvalidArgument("fisher_distance: variance must be positive");
  const std::size_t n = samples.size();
  if (n == 0) throw InvalidArgument("fisher_distance: no samples");
  constexpr std::size_t kBatches = 32;
  std::vector<double> bsum(kBatches, 0.0), bcnt(kBatches, 0.0);
  double total = 0.0, inside = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = samples[i];
    if (!sm.in_range(x)) continue;
    const double d = sm(x) + (x - mu) / var;
    const std::size_t b = i * kBatches / n;
    bsum[b] += d * d;
    bcnt[b] += 1.0;
    total += d * d;
    inside += 1.0;
  }
  FisherEstimate fe;
  fe.outside_fraction = 1.0 - inside / static_cast<double>(n);
  fe.warning = fe.outside_fraction > 0.05;
  if (inside == 0.0) return fe;
  fe.estimate = total / inside;
  double m = 0.0, ss = 0.0, k = 0.0;
  for (std::size_t b = 0; b < kBatches; ++b) {
    if (bcnt[b] == 0.0) continue;
    const double v = bsum[b] / bcnt[b];
    m += v;
    ss += v * v;
    k += 1.0;
  }
  if (k > 1.0) {
    m /= k;
    fe.std_error = std::sqrt(std::max(0.0, (ss - k * m * m) / (k - 1.0)) / k);
  }
  return fe;
}

namespace {

// fit on everything for the estimate, refit per contiguous batch for the error
template <class T, class Fit, class Values>
FisherEstimate fisher_with_refit(std::span<const T> items, double mu, double var, Fit&& fit, Values&& values,
                                 ScoreModel* fitted) {
  const ScoreModel sm = fit(items);
  FisherEstimate fe = fisher_distance(sm, values(items), mu, var);
  if (fitted) *fitted = sm;
  const std::size_t n = items.size();
  const std::size_t batches = std::min<std::size_t>(32, n / 1000);
  if (batches < 2) {
    fe.std_error = std::numeric_limits<double>::infinity();
    return fe;
  }
  std::vector<double> est;
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t lo = b * n / batches, hi = (b + 1) * n / batches;
    const auto part = items.subspan(lo, hi - lo);
    est.push_back(fisher_distance(fit(part), values(part), mu, var).estimate);
  }
  double m = 0.0;
  for (double v : est) m += v;
  m /= static_cast<double>(batches);
  double ss = 0.0;
  for (double v : est) ss += (v - m) * (v - m);
  fe.std_error = std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
  return fe;
}

}  // namespace

FisherEstimate fisher_by_regression(std::span<const MalliavinSample> ms, double mu, double var,
                                    const ScoreOptions& opt, ScoreModel* fitted) {
  return fisher_with_refit(
      ms, mu, var, [&opt](std::span<const MalliavinSample> part) { return score_by_regression(part, opt); },
      [](std::span<const MalliavinSample> part) {
        std::vector<double> F(part.size());
        for (std::size_t i = 0; i < part.size(); ++i) F[i] = part[i].F;
        return F;
      },
      fitted);
}

namespace {

// Two KDE scores fitted on the even and odd samples; the product of their
// residuals has the fit noise cancel in expectation, which a plain mean
// square would add as a positive bias.
double kde_cross_fit(std::span<const double> x, double mu, double var, const ScoreOptions& opt, double* outside) {
  std::vector<double> a, b;
  a.reserve(x.size() / 2 + 1);
  b.reserve(x.size() / 2 + 1);
  for (std::size_t i = 0; i < x.size(); ++i) (i % 2 == 0 ? a : b).push_back(x[i]);
  const ScoreModel sa = score_by_kde(a, opt), sb = score_by_kde(b, opt);
  double sum = 0.0, inside = 0.0;
  for (double v : x) {
    if (!sa.in_range(v) || !sb.in_range(v)) continue;
    const double lin = (v - mu) / var;
    sum += (sa(v) + lin) * (sb(v) + lin);
    inside += 1.0;
  }
  if (outside) *outside = 1.0 - inside / static_cast<double>(x.size());
  if (inside == 0.0) throw Error("fisher_by_kde: no samples inside the knot range");
  return sum / inside;
}

}  // namespace

FisherEstimate fisher_by_kde(std::span<const double> samples, double mu, double var, const ScoreOptions& opt,
                             ScoreModel* fitted) {
  if (!(var > 0.0)) throw InvalidArgument("fisher_by_kde: variance must be positive");
  if (samples.size() < 2000) throw InvalidArgument("fisher_by_kde needs at least 2000 samples");
  FisherEstimate fe;
  fe.estimate = kde_cross_fit(samples, mu, var, opt, &fe.outside_fraction);
  fe.warning = fe.outside_fraction > 0.05;
  if (fitted) *fitted = score_by_kde(samples, opt);
  const std::size_t n = samples.size();
  const std::size_t batches = std::min<std::size_t>(32, n / 2000);
  if (batches < 2) {
    fe.std_error = std::numeric_limits<double>::infinity();
    return fe;
  }
  std::vector<double> est;
  for (std::size_t k = 0; k < batches; ++k) {
    const std::size_t lo = k * n / batches, hi = (k + 1) * n / batches;
    est.push_back(kde_cross_fit(samples.subspan(lo, hi - lo), mu, var, opt, nullptr));
  }
  double m = 0.0;
  for (double v : est) m += v;
  m /= static_cast<double>(batches);
  double ss = 0.0;
  for (double v : est) ss += (v - m) * (v - m);
  fe.std_error = std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
  return fe;
}

double dkw_band(std::size_t n, double alpha) {
  return std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(n)));
}

KolmogorovEstimate kolmogorov_distance(std::span<const double> samples, double mu, double var) {
  if (!(var > 0.0)) throw InvalidArgument("kolmogorov_distance: variance must be positive");
  const std::size_t n = samples.size();
  if (n == 0) throw InvalidArgument("kolmogorov_distance: no samples");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double sd = std::sqrt(var);
  double d = 0.0;
  const double nn = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double F = 0.5 * std::erfc(-(s[i] - mu) / (sd * std::numbers::sqrt2));
    d = std::max({d, (i + 1) / nn - F, F - i / nn});
  }
  return {std::min(d, 1.0), dkw_band(n)};
}

double gaussian_fisher_closed(double mu1, double var1, double mu2, double var2) {
  if (!(var1 > 0.0) || !(var2 > 0.0)) throw InvalidArgument("gaussian_fisher_closed: variances must be positive");
  const double dm = mu1 - mu2;
  const double dv = 1.0 / var2 - 1.0 / var1;
  return dm * dm / (var2 * var2) + var1 * dv * dv;
}

std::string to_json(const DistanceReport& r) {
  nlohmann::json j;
  j["eps"] = r.eps;
  j["t"] = r.t;
  j["n"] = r.n;
  j["mu"] = r.mu;
  j["var"] = r.var;
  j["fisher"] = r.fisher;
  j["fisher_se"] = r.fisher_se;
  j["kolmogorov"] = r.kolmogorov;
  j["kolmogorov_band"] = r.kolmogorov_band;
  j["method"] = r.method;
  j["bandwidth"] = r.bandwidth;
  j["outside_fraction"] = r.outside_fraction;
  j["warning"] = r.warning;
  return j.dump();
}

PinskerVerdict pinsker_check(const DistanceReport& r) {
  PinskerVerdict v;
  const double f = std::max(0.0, r.fisher);
  const double root = std::sqrt(f);
  v.slack = root - r.kolmogorov;
  const double band = r.n > 0 ? dkw_band(r.n) : r.kolmogorov_band;
  v.allowance = band + (std::sqrt(f + 1.96 * std::max(0.0, r.fisher_se)) - root);
  v.pass = r.kolmogorov <= root + v.allowance;
  return v;
}

}  // namespace snfl
