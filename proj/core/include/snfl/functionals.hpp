#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "snfl/noise.hpp"
#include "snfl/path_engine.hpp"
#include "snfl/problem.hpp"
#include "snfl/projection.hpp"
#include "snfl/skeleton.hpp"

namespace snfl {

/// F = X~_t = (X_t - x_t)/eps, or F = Y~_t = (int_0^t f(s,X_s)ds - y_t)/eps.
enum class Functional { terminal_state, additive };

const char* to_string(Functional f) noexcept;

struct MalliavinSample {
  std::uint64_t path_id = 0;
  double F = 0.0;
  double theta = 0.0;
  double u_norm2 = 0.0;
  double dtheta_u = 0.0;
  double dtheta_norm2 = 0.0;
};

/// CSV with `#schema=` header and columns path_id,F,theta,u_norm2,dtheta_u,dtheta_norm2.
void write_csv(std::span<const MalliavinSample> samples, std::ostream& os);

/// Exact Malliavin calculus of the Euler scheme for one path.
///
/// The scheme X_{k+1} = X_k + b h + eps sigma dB_k is a smooth function of
/// the increments, and D_s F for s in [t_j, t_{j+1}) is dF/d(dB_j). With
/// J_k = 1 + b'_k h + eps sigma'_k dB_k and P_k = prod_{l<k} J_l:
///   D_j F = sigma_j Gamma_{j+1} / P_{j+1},   Gamma_a = sum_{k>=a} w_k phi'_k P_k
/// and the second derivatives follow from
///   C_a = sum_{l<a} (b''_l h + eps sigma''_l dB_l) P_l / J_l,
///   H_a = sum_{k>=a} w_k (phi''_k P_k^2 + phi'_k P_k C_k) - C_a Gamma_a.
/// D Theta is assembled with prefix/suffix sums, so a path costs O(n).
class PathwiseKernel {
public:
  PathwiseKernel(const Problem& p, const SkeletonPath& sk, double eps, std::size_t final_index, Functional fn);

  void simulate(const NoiseKey& key);
  /// Runs the scheme from caller-supplied increments (size >= final_index).
  void evaluate(std::span<const double> dB);

  std::size_t final_index() const noexcept { return m_; }
  double F() const noexcept { return F_; }
  std::span<const double> X() const noexcept { return X_; }
  std::span<const double> increments() const noexcept { return dB_; }
  /// D_j F for j < final_index.
  std::span<const double> dF() const noexcept { return dF_; }
  /// Regression targets whose conditional means given X_j are
  /// E[D_j F | F_j] / sigma_j and its x-derivative.
  std::span<const double> g_target() const noexcept { return gt_; }
  std::span<const double> gprime_target() const noexcept { return gpt_; }

  /// u_j = sigma_j g(j, X_j); Theta = h sum_j D_jF u_j.
  MalliavinSample assemble(const ProjectionFn& g, const ProjectionFn& gprime, bool gradient) const;
  /// D_i Theta for i < final_index.
  std::vector<double> dtheta(const ProjectionFn& g, const ProjectionFn& gprime) const;

private:
  const Problem& p_;
  const SkeletonPath& sk_;
  double eps_, h_;
  std::size_t m_;
  Functional fn_;
  std::vector<double> w_, f_ref_;
  std::vector<double> X_, dB_, s_, s1_, P_, G_, H_, dF_, gt_, gpt_;
  double F_ = 0.0;
};

struct ProjectionBudget {
  std::size_t paths = 20000;
  std::size_t bins = 64;
  std::size_t min_count = 50;
  std::size_t branches = 256;  ///< inner continuations for branching
  std::size_t pilot = 16384;   ///< paths used to place quantile edges
};

/// g(r, x) ~ E[exp(int_r^t b'(X)) Z_{r,t} | X_r = x] for r = 0..m, from
/// left-point exponent sums and the Euler recursion of Z.
ConditionalProjection conditional_projection(const Problem& p, const SkeletonPath& sk, double eps, double t,
                                             ProjectionMethod method, const ProjectionBudget& budget,
                                             std::uint64_t seed);

/// How field-level integrals over r are assembled.
enum class Assembly { simpson, left_riemann };

struct ThetaValue {
  double theta = 0.0;
  double u_norm2 = 0.0;
};

struct GradientValue {
  double dtheta_u = 0.0;
  double dtheta_norm2 = 0.0;
};

/// Field-level Theta for X~_t with t = final_index * h: u_r = sigma_r g(r, X_r),
/// Theta = int D_r X~_t u_r dr.
ThetaValue theta(const PathState& ps, const DerivativeField& d1, const ProjectionFn& g, std::size_t final_index,
                 Assembly rule = Assembly::simpson);

/// D_theta Theta = int [D_theta D_r X~ u_r + D_r X~ (sigma'_r g + sigma_r g'_r) D_theta X_r 1{r>theta}] dr.
GradientValue theta_gradient(const PathState& ps, const DerivativeField& d1, const SecondDerivativeField& d2,
                             const ProjectionFn& g, const ProjectionFn& gprime, Assembly rule = Assembly::simpson);

/// Field-level functionals of Y~_t. D_r Y~ = sum_{s>r} w_s f'(X_s) D_r X~_s with
/// fourth-order weights w; needs second-derivative fields at every s when
/// gradient is requested (O(n^3)).
MalliavinSample additive_fields(const Problem& p, const PathState& ps, const DerivativeField& d1,
                                const ProjectionFn& g, const ProjectionFn& gprime, std::size_t final_index,
                                Assembly rule = Assembly::left_riemann, bool gradient = true);

struct EnsembleSpec {
  double eps = 0.1;
  double t = 1.0;
  std::size_t paths = 100000;
  std::uint64_t seed = 1;
  Functional functional = Functional::terminal_state;
  ProjectionBudget budget;
  bool gradient = true;
  /// Also record the first-order limit of F (a centered Gaussian linear in
  /// the increments) per path, for control-variate estimators.
  bool limit_control = false;
};

struct Ensemble {
  EnsembleSpec spec;
  std::size_t final_index = 0;
  std::vector<MalliavinSample> samples;
  ConditionalProjection g, gprime;
  std::vector<double> control;  ///< limit term per path (limit_control only)
  double control_var = 0.0;     ///< its exact variance
};

/// Coefficients c_j of the first-order limit L = sum_j c_j dB_j of F, built
/// from the eps = 0 Euler iterates.
std::vector<double> limit_coefficients(const Problem& p, const SkeletonPath& sk, std::size_t final_index,
                                       Functional fn);

/// Three passes over keyed paths: pilot (quantile edges), projection
/// accumulation, sample assembly. Deterministic for any worker count.
Ensemble sample_ensemble(const Problem& p, const SkeletonPath& sk, const EnsembleSpec& spec);

struct TailReport {
  double top5_share = 0.0;     ///< share of the sum from the 5 largest terms
  double jackknife_se = 0.0;
  double trimmed_estimate = 0.0;  ///< top 0.1% dropped
};

struct NegativeMoment {
  double estimate = 0.0;
  double std_error = 0.0;
  TailReport tail;
};

/// Mean of s^{-p0}. Throws InvalidArgument naming the first nonpositive sample.
NegativeMoment negative_moment(std::span<const double> samples, double p0);

enum class VolterraKernel { constant, quadratic };

struct VolterraRow {
  VolterraKernel kernel = VolterraKernel::constant;
  double t = 0.0;
  NegativeMoment moment;
};

struct VolterraTable {
  std::vector<VolterraRow> rows;
  double slope_constant = 0.0;   ///< fitted d log E / d log t, k = 1
  double slope_quadratic = 0.0;  ///< k = (t-r)^2
  double expected_constant = 0.0, expected_quadratic = 0.0;
};

/// E[(int_0^t k(t,r) sigma^2(r, X_r) dr)^{-p0}] for k = 1 and k = (t-r)^2
/// at each t (grid times of an n-step mesh on [0, T]).
VolterraTable volterra_negative_moment_check(const Problem& p, double eps, double p0, std::span<const double> t_list,
                                             std::size_t paths, std::size_t n, std::uint64_t seed);

/// delta(V_t DU_t) = V_t U_t - <DV_t, DU_t>, pairing by the scheme's left sums.
double skorokhod_lower_functional(const LimitPair& lp, std::size_t t_index,
                                  FieldMethod method = FieldMethod::pathwise);

}  // namespace snfl
