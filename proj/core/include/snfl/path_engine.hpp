#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "snfl/noise.hpp"
#include "snfl/problem.hpp"
#include "snfl/skeleton.hpp"

namespace snfl {

/// Lower-triangular array d(r, t), r <= t, over grid indices 0..n.
class LowerTriangle {
public:
  LowerTriangle() = default;
  explicit LowerTriangle(std::size_t n) : n_(n), v_((n + 1) * (n + 2) / 2, 0.0) {}

  std::size_t n() const noexcept { return n_; }
  double operator()(std::size_t r, std::size_t t) const noexcept { return r > t ? 0.0 : v_[t * (t + 1) / 2 + r]; }
  double& at(std::size_t r, std::size_t t) noexcept { return v_[t * (t + 1) / 2 + r]; }

private:
  std::size_t n_ = 0;
  std::vector<double> v_;
};

/// One Euler-Maruyama path of X with the coefficient samples the Malliavin
/// fields need. A pure function of (problem, eps, seed, path_id, n).
struct PathState {
  double eps = 0.0;
  std::size_t n = 0;
  double h = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t path_id = 0;
  std::vector<double> X;        ///< n+1 states, X[0] = X0
  std::vector<double> dB;       ///< n increments
  std::vector<double> sigma;    ///< sigma(t_i, X_i), n+1
  std::vector<double> sigma1;   ///< sigma'(t_i, X_i), n+1
  std::vector<double> b1;       ///< b'(t_i, X_i), n+1
  std::vector<double> b1_cum;   ///< left-point sums of b' h, n+1

  /// Z_{r,t} from its Euler recursion Z_{k+1} = Z_k (1 + eps sigma'_k dB_k).
  double z(std::size_t r, std::size_t t) const noexcept;
  /// Full triangle; only built on request.
  LowerTriangle z_field() const;
};

/// Throws InvalidArgument on eps outside [0,1) or mismatched grids, and
/// NumericalError with the step index on a non-finite state.
PathState simulate_sde(const Problem& p, double eps, const NoiseStream& ns, const SkeletonPath& sk);

/// (X_k - x^E_k) / eps, centered on the eps = 0 Euler iterate.
double rescaled_state(const PathState& ps, const SkeletonPath& sk, std::size_t k);

/// closed_form: eps sigma_r exp(int_r^t b') Z_{r,t};
/// variational: Euler scheme of the linear SDE started at eps sigma_r;
/// pathwise: exact derivative of the Euler scheme with respect to dB_r.
enum class FieldMethod { closed_form, variational, pathwise };

const char* to_string(FieldMethod m) noexcept;

struct DerivativeField {
  LowerTriangle d;  ///< d(r, t) = D_{t_r} X_{t}
  FieldMethod provenance = FieldMethod::closed_form;
};

DerivativeField malliavin_first(const PathState& ps, FieldMethod method);

/// Square field d2(theta, r) = D_theta D_r X_{t_final}.
struct SecondDerivativeField {
  std::size_t final_index = 0;
  std::vector<double> values;  ///< (final_index+1)^2, row major
  FieldMethod provenance = FieldMethod::variational;
  bool reduced = false;  ///< built with the sigma' = sigma'' = 0 closed form

  double operator()(std::size_t theta, std::size_t r) const noexcept { return values[theta * (final_index + 1) + r]; }
  double symmetry_defect() const noexcept;
};

/// With method = variational: reduced closed form when sigma' and sigma''
/// vanish, otherwise the Euler scheme of the second variational equation
/// from node max(theta, r). With method = pathwise: exact second derivative
/// of the Euler scheme (d1 must then be pathwise too).
SecondDerivativeField malliavin_second(const Problem& p, const PathState& ps, const DerivativeField& d1,
                                       double t_final, FieldMethod method = FieldMethod::variational);

/// Single entry of the variational second derivative, O(n).
double second_derivative_entry(const Problem& p, const PathState& ps, const DerivativeField& d1, std::size_t theta,
                               std::size_t r, std::size_t final_index);

/// Deterministic coefficients of the limit pair along the Euler skeleton.
struct LimitModel {
  std::size_t n = 0;
  double h = 0.0;
  std::vector<double> sigma, sigma1, b1, b2;  ///< at x^E_k
  std::vector<double> Q;                      ///< prod_{l<k} (1 + b'_l h)
  std::vector<double> exponent;               ///< left-point int_0^{t_k} b'
  LowerTriangle du;                           ///< D_r U_t, exact for the scheme
};

std::shared_ptr<const LimitModel> limit_model(const Problem& p, const SkeletonPath& sk);

/// U, V first/second order terms of the eps-expansion.
struct LimitPair {
  std::shared_ptr<const LimitModel> model;
  std::vector<double> U, V, dB;

  /// D_r V_t for r = 0..t-1 (O(n)); closed_form uses the explicit solution
  /// with exponentials, pathwise the exact scheme derivative.
  std::vector<double> dv_column(std::size_t t, FieldMethod method = FieldMethod::pathwise) const;
  std::vector<double> du_column(std::size_t t, FieldMethod method = FieldMethod::pathwise) const;
  LowerTriangle dv_field() const;
};

LimitPair simulate_limit_pair(const Problem& p, const NoiseStream& ns, const SkeletonPath& sk);
LimitPair simulate_limit_pair(std::shared_ptr<const LimitModel> model, const NoiseStream& ns);

/// Binary dump: magic "SNFLPATH", u32 version, u64 n, f64 eps, u64 seed,
/// u64 path_id, f64 h, then X, dB, sigma, sigma1, b1, b1_cum as f64 arrays.
void write_path_state(const PathState& ps, std::ostream& os);
PathState read_path_state(std::istream& is);

}  // namespace snfl
