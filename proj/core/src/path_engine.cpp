#include "snfl/path_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "snfl/error.hpp"
#include "snfl/quadrature.hpp"

namespace snfl {

const char* to_string(FieldMethod m) noexcept {
  switch (m) {
    case FieldMethod::closed_form: return "closed_form";
    case FieldMethod::variational: return "variational";
    case FieldMethod::pathwise: return "pathwise";
  }
  return "?";
}

double PathState::z(std::size_t r, std::size_t t) const noexcept {
  double v = 1.0;
  for (std::size_t k = r; k < t; ++k) v *= 1.0 + eps * sigma1[k] * dB[k];
  return v;
}

LowerTriangle PathState::z_field() const {
  LowerTriangle z(n);
  for (std::size_t r = 0; r <= n; ++r) {
    double v = 1.0;
    z.at(r, r) = 1.0;
    for (std::size_t t = r; t < n; ++t) {
      v *= 1.0 + eps * sigma1[t] * dB[t];
      z.at(r, t + 1) = v;
    }
  }
  return z;
}

PathState simulate_sde(const Problem& p, double eps, const NoiseStream& ns, const SkeletonPath& sk) {
  if (!(eps >= 0.0 && eps < 1.0)) throw InvalidArgument("simulate_sde: eps must lie in [0,1)");
  if (ns.n != sk.n || std::abs(ns.T - sk.T) > 1e-12 * sk.T)
    throw InvalidArgument("simulate_sde: noise grid does not match skeleton grid");
  PathState ps;
  ps.eps = eps;
  ps.n = ns.n;
  ps.h = sk.h;
  ps.seed = ns.seed;
  ps.path_id = ns.path_id;
  ps.dB = ns.dB;
  const std::size_t n = ns.n;
  const double h = sk.h;
  ps.X.resize(n + 1);
  ps.sigma.resize(n + 1);
  ps.sigma1.resize(n + 1);
  ps.b1.resize(n + 1);
  ps.b1_cum.resize(n + 1);
  ps.X[0] = p.x0;
  ps.b1_cum[0] = 0.0;
  for (std::size_t i = 0;; ++i) {
    const double t = sk.t[i], x = ps.X[i];
    ps.sigma[i] = p.sigma(t, x);
    ps.sigma1[i] = p.sigma1(t, x);
    ps.b1[i] = p.b1(t, x);
    if (i == n) break;
    ps.b1_cum[i + 1] = ps.b1_cum[i] + ps.b1[i] * h;
    ps.X[i + 1] = x + p.b(t, x) * h + eps * ps.sigma[i] * ps.dB[i];
    if (!std::isfinite(ps.X[i + 1])) throw NumericalError("simulate_sde: non-finite state", i + 1);
  }
  return ps;
}

double rescaled_state(const PathState& ps, const SkeletonPath& sk, std::size_t k) {
  return (ps.X[k] - sk.euler_x[k]) / ps.eps;
}

DerivativeField malliavin_first(const PathState& ps, FieldMethod method) {
  const std::size_t n = ps.n;
  DerivativeField f{LowerTriangle(n), method};
  for (std::size_t r = 0; r <= n; ++r) {
    const double start = ps.eps * ps.sigma[r];
    f.d.at(r, r) = start;
    double v = start;
    switch (method) {
      case FieldMethod::closed_form: {
        double z = 1.0;
        for (std::size_t t = r; t < n; ++t) {
          z *= 1.0 + ps.eps * ps.sigma1[t] * ps.dB[t];
          f.d.at(r, t + 1) = start * std::exp(ps.b1_cum[t + 1] - ps.b1_cum[r]) * z;
        }
        break;
      }
      case FieldMethod::variational:
        for (std::size_t t = r; t < n; ++t) {
          v *= 1.0 + ps.b1[t] * ps.h + ps.eps * ps.sigma1[t] * ps.dB[t];
          f.d.at(r, t + 1) = v;
        }
        break;
      case FieldMethod::pathwise:
        // dB_r moves X_{r+1} by eps sigma_r; later steps multiply by J_t
        if (r < n) f.d.at(r, r + 1) = v;
        for (std::size_t t = r + 1; t < n; ++t) {
          v *= 1.0 + ps.b1[t] * ps.h + ps.eps * ps.sigma1[t] * ps.dB[t];
          f.d.at(r, t + 1) = v;
        }
        break;
    }
  }
  return f;
}

double SecondDerivativeField::symmetry_defect() const noexcept {
  double m = 0.0;
  const std::size_t k = final_index + 1;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < i; ++j) m = std::max(m, std::abs(values[i * k + j] - values[j * k + i]));
  return m;
}

namespace {

struct SecondCoefficients {
  std::vector<double> b2, sigma2;
};

SecondCoefficients second_coefficients(const Problem& p, const PathState& ps) {
  SecondCoefficients c;
  c.b2.resize(ps.n + 1);
  c.sigma2.resize(ps.n + 1);
  for (std::size_t i = 0; i <= ps.n; ++i) {
    const double t = ps.h * static_cast<double>(i);
    c.b2[i] = p.b2(t, ps.X[i]);
    c.sigma2[i] = p.sigma2(t, ps.X[i]);
  }
  return c;
}

double variational_entry(const PathState& ps, const SecondCoefficients& c, const DerivativeField& d1, std::size_t th,
                         std::size_t r, std::size_t m) {
  const std::size_t hi = std::max(th, r), lo = std::min(th, r);
  double v = ps.eps * ps.sigma1[hi] * d1.d(lo, hi);
  for (std::size_t s = hi; s < m; ++s) {
    const double dd = d1.d(th, s) * d1.d(r, s);
    v += (c.b2[s] * dd + ps.b1[s] * v) * ps.h + ps.eps * (c.sigma2[s] * dd + ps.sigma1[s] * v) * ps.dB[s];
  }
  return v;
}

double reduced_entry(const PathState& ps, const SecondCoefficients& c, const DerivativeField& d1, std::size_t th,
                     std::size_t r, std::size_t m, std::vector<double>& buf) {
  const std::size_t hi = std::max(th, r);
  if (hi >= m) return 0.0;
  buf.resize(m - hi + 1);
  for (std::size_t s = hi; s <= m; ++s)
    buf[s - hi] = c.b2[s] * d1.d(th, s) * d1.d(r, s) * std::exp(ps.b1_cum[m] - ps.b1_cum[s]);
  return integrate(buf, ps.h);
}

}  // namespace

double second_derivative_entry(const Problem& p, const PathState& ps, const DerivativeField& d1, std::size_t theta,
                               std::size_t r, std::size_t m) {
  if (m > ps.n || theta > m || r > m) throw InvalidArgument("second_derivative_entry: index out of range");
  const auto c = second_coefficients(p, ps);
  return variational_entry(ps, c, d1, theta, r, m);
}

SecondDerivativeField malliavin_second(const Problem& p, const PathState& ps, const DerivativeField& d1,
                                       double t_final, FieldMethod method) {
  if (d1.d.n() != ps.n) throw InvalidArgument("malliavin_second: field does not belong to this path");
  const std::size_t m = static_cast<std::size_t>(std::llround(t_final / ps.h));
  if (m > ps.n || std::abs(m * ps.h - t_final) > 1e-9) throw InvalidArgument("malliavin_second: t_final off-grid");
  SecondDerivativeField f;
  f.final_index = m;
  f.values.assign((m + 1) * (m + 1), 0.0);
  const auto c = second_coefficients(p, ps);
  const std::size_t k = m + 1;

  if (method == FieldMethod::pathwise) {
    if (d1.provenance != FieldMethod::pathwise) throw InvalidArgument("malliavin_second: pathwise needs a pathwise d1");
    f.provenance = FieldMethod::pathwise;
    // P_k = prod_{l<k} J_l; C_a = sum_{l<a} (b''_l h + eps sigma''_l dB_l) P_l / J_l
    std::vector<double> P(m + 1, 1.0), C(m + 1, 0.0);
    for (std::size_t l = 0; l < m; ++l) {
      const double J = 1.0 + ps.b1[l] * ps.h + ps.eps * ps.sigma1[l] * ps.dB[l];
      P[l + 1] = P[l] * J;
      C[l + 1] = C[l] + (c.b2[l] * ps.h + ps.eps * c.sigma2[l] * ps.dB[l]) * P[l] / J;
    }
    const double e2 = ps.eps * ps.eps;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        // i = max index, j = min index
        double v = ps.sigma[i] * ps.sigma[j] * (C[m] - C[i + 1]);
        if (i != j) v += ps.sigma[j] * ps.sigma1[i] * P[i];
        v *= e2 * P[m] / (P[i + 1] * P[j + 1]);
        f.values[i * k + j] = f.values[j * k + i] = v;
      }
    return f;
  }

  f.provenance = d1.provenance;
  f.reduced = p.sigma_state_free();
  std::vector<double> buf;
  for (std::size_t i = 0; i <= m; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = f.reduced ? reduced_entry(ps, c, d1, i, j, m, buf) : variational_entry(ps, c, d1, i, j, m);
      f.values[i * k + j] = f.values[j * k + i] = v;
    }
  return f;
}

// ---------------------------------------------------------------------------
// limit pair

std::shared_ptr<const LimitModel> limit_model(const Problem& p, const SkeletonPath& sk) {
  auto m = std::make_shared<LimitModel>();
  const std::size_t n = sk.n;
  m->n = n;
  m->h = sk.h;
  m->sigma.resize(n + 1);
  m->sigma1.resize(n + 1);
  m->b1.resize(n + 1);
  m->b2.resize(n + 1);
  m->Q.assign(n + 1, 1.0);
  m->exponent.assign(n + 1, 0.0);
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = sk.t[k], x = sk.euler_x[k];
    m->sigma[k] = p.sigma(t, x);
    m->sigma1[k] = p.sigma1(t, x);
    m->b1[k] = p.b1(t, x);
    m->b2[k] = p.b2(t, x);
  }
  for (std::size_t k = 0; k < n; ++k) {
    m->Q[k + 1] = m->Q[k] * (1.0 + m->b1[k] * sk.h);
    m->exponent[k + 1] = m->exponent[k] + m->b1[k] * sk.h;
  }
  m->du = LowerTriangle(n);
  for (std::size_t r = 0; r <= n; ++r) {
    m->du.at(r, r) = m->sigma[r];
    for (std::size_t t = r + 1; t <= n; ++t) m->du.at(r, t) = m->sigma[r] * m->Q[t] / m->Q[r + 1];
  }
  return m;
}

LimitPair simulate_limit_pair(std::shared_ptr<const LimitModel> model, const NoiseStream& ns) {
  if (ns.n != model->n) throw InvalidArgument("simulate_limit_pair: noise grid does not match skeleton grid");
  LimitPair lp;
  const LimitModel& m = *model;
  lp.model = std::move(model);
  lp.dB = ns.dB;
  lp.U.assign(m.n + 1, 0.0);
  lp.V.assign(m.n + 1, 0.0);
  for (std::size_t k = 0; k < m.n; ++k) {
    const double u = lp.U[k];
    lp.U[k + 1] = u * (1.0 + m.b1[k] * m.h) + m.sigma[k] * lp.dB[k];
    lp.V[k + 1] = lp.V[k] * (1.0 + m.b1[k] * m.h) + 0.5 * m.b2[k] * u * u * m.h + m.sigma1[k] * u * lp.dB[k];
  }
  return lp;
}

LimitPair simulate_limit_pair(const Problem& p, const NoiseStream& ns, const SkeletonPath& sk) {
  if (ns.n != sk.n || std::abs(ns.T - sk.T) > 1e-12 * sk.T)
    throw InvalidArgument("simulate_limit_pair: noise grid does not match skeleton grid");
  return simulate_limit_pair(limit_model(p, sk), ns);
}

std::vector<double> LimitPair::du_column(std::size_t t, FieldMethod method) const {
  const LimitModel& m = *model;
  std::vector<double> out(t);
  for (std::size_t r = 0; r < t; ++r)
    out[r] = method == FieldMethod::closed_form ? m.sigma[r] * std::exp(m.exponent[t] - m.exponent[r]) : m.du(r, t);
  return out;
}

std::vector<double> LimitPair::dv_column(std::size_t t, FieldMethod method) const {
  const LimitModel& m = *model;
  std::vector<double> out(t, 0.0);
  if (t == 0) return out;
  if (method == FieldMethod::closed_form) {
    // explicit solution: exponentials of left-point sums, Ito sums for dB
    double s = 0.0;  // sum_{k=r+1}^{t-1} (b'' U h + sigma' dB) e^{-E_k} e^{E_k}
    for (std::size_t r = t; r-- > 0;) {
      const double g = std::exp(m.exponent[t] - m.exponent[r]);
      out[r] = m.sigma1[r] * U[r] * g + m.sigma[r] * g * s;
      s += m.b2[r] * U[r] * m.h + m.sigma1[r] * dB[r];
    }
    return out;
  }
  // exact adjoint of the scheme: suffix sums of Q_t / Q_{k+1} Q_k src_k
  double s = 0.0;
  for (std::size_t r = t; r-- > 0;) {
    out[r] = (m.sigma1[r] * U[r] * m.Q[t] + m.sigma[r] * s) / m.Q[r + 1];
    s += m.Q[t] / m.Q[r + 1] * m.Q[r] * (m.b2[r] * U[r] * m.h + m.sigma1[r] * dB[r]);
  }
  return out;
}

LowerTriangle LimitPair::dv_field() const {
  const LimitModel& m = *model;
  LowerTriangle f(m.n);
  for (std::size_t r = 0; r < m.n; ++r) {
    double v = m.sigma1[r] * U[r];
    f.at(r, r + 1) = v;
    for (std::size_t t = r + 1; t < m.n; ++t) {
      v = v * (1.0 + m.b1[t] * m.h) + (m.b2[t] * U[t] * m.h + m.sigma1[t] * dB[t]) * m.du(r, t);
      f.at(r, t + 1) = v;
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// binary dump

namespace {

constexpr char kMagic[8] = {'S', 'N', 'F', 'L', 'P', 'A', 'T', 'H'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw InvalidArgument("path dump truncated");
  return v;
}
void put_array(std::ostream& os, const std::vector<double>& a) {
  os.write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
}
std::vector<double> get_array(std::istream& is, std::size_t n) {
  std::vector<double> a(n);
  is.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw InvalidArgument("path dump truncated");
  return a;
}

}  // namespace

void write_path_state(const PathState& ps, std::ostream& os) {
  os.write(kMagic, sizeof kMagic);
  put(os, kVersion);
  put(os, static_cast<std::uint64_t>(ps.n));
  put(os, ps.eps);
  put(os, ps.seed);
  put(os, ps.path_id);
  put(os, ps.h);
  put_array(os, ps.X);
  put_array(os, ps.dB);
  put_array(os, ps.sigma);
  put_array(os, ps.sigma1);
  put_array(os, ps.b1);
  put_array(os, ps.b1_cum);
}

PathState read_path_state(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw InvalidArgument("not a path dump");
  if (get<std::uint32_t>(is) != kVersion) throw InvalidArgument("unsupported path dump version");
  PathState ps;
  ps.n = static_cast<std::size_t>(get<std::uint64_t>(is));
  if (ps.n == 0 || ps.n > (1u << 20)) throw InvalidArgument("path dump has implausible n");
  ps.eps = get<double>(is);
  ps.seed = get<std::uint64_t>(is);
  ps.path_id = get<std::uint64_t>(is);
  ps.h = get<double>(is);
  ps.X = get_array(is, ps.n + 1);
  ps.dB = get_array(is, ps.n);
  ps.sigma = get_array(is, ps.n + 1);
  ps.sigma1 = get_array(is, ps.n + 1);
  ps.b1 = get_array(is, ps.n + 1);
  ps.b1_cum = get_array(is, ps.n + 1);
  return ps;
}

}  // namespace snfl
