#include "snfl/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>

#include "snfl/error.hpp"
#include "snfl/parallel.hpp"
#include "snfl/quadrature.hpp"
#include "snfl/rate_fit.hpp"

namespace snfl {

const char* to_string(Functional f) noexcept { return f == Functional::additive ? "additive" : "terminal_state"; }

void write_csv(std::span<const MalliavinSample> samples, std::ostream& os) {
  os << "#schema=malliavin_sample/1\n";
  os << "path_id,F,theta,u_norm2,dtheta_u,dtheta_norm2\n";
  char buf[256];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%.17g,%.17g,%.17g\n", static_cast<unsigned long long>(s.path_id),
                  s.F, s.theta, s.u_norm2, s.dtheta_u, s.dtheta_norm2);
    os << buf;
  }
}

// ---------------------------------------------------------------------------
// pathwise kernel

PathwiseKernel::PathwiseKernel(const Problem& p, const SkeletonPath& sk, double eps, std::size_t m, Functional fn)
    : p_(p), sk_(sk), eps_(eps), h_(sk.h), m_(m), fn_(fn) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("functionals need eps in (0,1)");
  if (m == 0 || m > sk.n) throw InvalidArgument("final index must lie in [1, n]");
  if (fn == Functional::additive && !p.has_f) throw InvalidArgument("problem " + p.label + " has no observable f");
  w_.assign(m + 1, 0.0);
  f_ref_.assign(m + 1, 0.0);
  if (fn == Functional::terminal_state) {
    w_[m] = 1.0;
    f_ref_[m] = sk.euler_x[m];
  } else {
    w_ = integration_weights(m, h_);
    for (std::size_t k = 0; k <= m; ++k) f_ref_[k] = p.f(sk.t[k], sk.euler_x[k]);
  }
  X_.resize(m + 1);
  dB_.resize(m);
  s_.resize(m + 1);
  s1_.resize(m + 1);
  P_.resize(m + 2);
  G_.resize(m + 2);
  H_.resize(m + 2);
  dF_.resize(m);
  gt_.resize(m);
  gpt_.resize(m);
}

void PathwiseKernel::simulate(const NoiseKey& key) {
  fill_increments(key, h_, dB_);
  evaluate(dB_);
}

void PathwiseKernel::evaluate(std::span<const double> dB) {
  if (dB.size() < m_) throw InvalidArgument("PathwiseKernel: too few increments");
  if (dB.data() != dB_.data()) std::copy(dB.begin(), dB.begin() + static_cast<std::ptrdiff_t>(m_), dB_.begin());
  const double eps = eps_, h = h_;
  // C is kept in H_ until the backward sweep overwrites it
  std::vector<double>& C = H_;
  X_[0] = p_.x0;
  P_[0] = 1.0;
  C[0] = 0.0;
  for (std::size_t k = 0; k < m_; ++k) {
    const double t = sk_.t[k], x = X_[k];
    const double s = p_.sigma(t, x), s1 = p_.sigma1(t, x), b1 = p_.b1(t, x);
    s_[k] = s;
    s1_[k] = s1;
    const double J = 1.0 + b1 * h + eps * s1 * dB_[k];
    P_[k + 1] = P_[k] * J;
    C[k + 1] = C[k] + (p_.b2(t, x) * h + eps * p_.sigma2(t, x) * dB_[k]) * P_[k] / J;
    X_[k + 1] = x + p_.b(t, x) * h + eps * s * dB_[k];
    if (!std::isfinite(X_[k + 1])) throw NumericalError("PathwiseKernel: non-finite state", k + 1);
  }
  s_[m_] = p_.sigma(sk_.t[m_], X_[m_]);
  s1_[m_] = p_.sigma1(sk_.t[m_], X_[m_]);

  // backward sweep: Gamma_a, A_a, then H_a = A_a - C_a Gamma_a
  double gamma = 0.0, A = 0.0, F = 0.0;
  G_[m_ + 1] = 0.0;
  H_[m_ + 1] = 0.0;
  for (std::size_t k = m_ + 1; k-- > 0;) {
    double d1 = 0.0, d2 = 0.0;
    if (fn_ == Functional::terminal_state) {
      if (k == m_) {
        d1 = 1.0;
        F = (X_[m_] - f_ref_[m_]) / eps;
      }
    } else {
      const double t = sk_.t[k];
      d1 = p_.f1(t, X_[k]);
      d2 = p_.f2(t, X_[k]);
      F += w_[k] * (p_.f(t, X_[k]) - f_ref_[k]);
    }
    const double wk = w_[k];
    if (wk != 0.0) {
      gamma += wk * d1 * P_[k];
      A += wk * (d2 * P_[k] * P_[k] + d1 * P_[k] * C[k]);
    }
    G_[k] = gamma;
    H_[k] = A - C[k] * gamma;  // C[k] read before being overwritten
  }
  F_ = fn_ == Functional::terminal_state ? F : F / eps;
  for (std::size_t j = 0; j < m_; ++j) {
    gt_[j] = G_[j + 1] / P_[j + 1];
    dF_[j] = s_[j] * gt_[j];
    gpt_[j] = H_[j + 1] / (P_[j] * P_[j + 1]);
  }
}

std::vector<double> PathwiseKernel::dtheta(const ProjectionFn& g, const ProjectionFn& gprime) const {
  const std::size_t m = m_;
  const double h = h_, eps = eps_;
  std::vector<double> u(m), Gv(m), Gp(m), e(m), c(m);
  for (std::size_t j = 0; j < m; ++j) {
    Gv[j] = g(j, X_[j]);
    Gp[j] = gprime(j, X_[j]);
    u[j] = s_[j] * Gv[j];
    e[j] = h * u[j] * (s_[j] * H_[j + 1] + s1_[j] * P_[j] * G_[j + 1]) / P_[j + 1];
    c[j] = h * dF_[j] * (s1_[j] * Gv[j] + s_[j] * Gp[j]) * P_[j];
  }
  std::vector<double> D(m);
  double suf_e = 0.0, suf_c = 0.0;
  for (std::size_t i = m; i-- > 0;) {
    D[i] = eps * s_[i] / P_[i + 1] * (suf_e + suf_c);
    suf_e += e[i];
    suf_c += c[i];
  }
  double pre = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double inv = 1.0 / P_[i + 1];
    D[i] += eps * inv *
            ((s_[i] * H_[i + 1] + s1_[i] * P_[i] * G_[i + 1]) * pre + s_[i] * s_[i] * H_[i + 1] * u[i] * h * inv);
    pre += h * s_[i] * u[i] * inv;
  }
  return D;
}

MalliavinSample PathwiseKernel::assemble(const ProjectionFn& g, const ProjectionFn& gprime, bool gradient) const {
  MalliavinSample out;
  out.F = F_;
  double th = 0.0, un = 0.0;
  std::vector<double> u(m_);
  for (std::size_t j = 0; j < m_; ++j) {
    u[j] = s_[j] * g(j, X_[j]);
    th += dF_[j] * u[j];
    un += u[j] * u[j];
  }
  out.theta = th * h_;
  out.u_norm2 = un * h_;
  if (gradient) {
    const auto D = dtheta(g, gprime);
    double du = 0.0, dn = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      du += u[i] * D[i];
      dn += D[i] * D[i];
    }
    out.dtheta_u = du * h_;
    out.dtheta_norm2 = dn * h_;
  }
  return out;
}

// ---------------------------------------------------------------------------
// ensembles

namespace {

using EdgeTable = std::vector<std::vector<double>>;

std::size_t final_index_of(const SkeletonPath& sk, double t) {
  const std::size_t m = sk.index_of(t);
  if (m == 0) throw InvalidArgument("functionals need t > 0");
  return m;
}

std::shared_ptr<const EdgeTable> edges_from(const std::vector<std::vector<double>>& cols, std::size_t bins) {
  auto e = std::make_shared<EdgeTable>();
  e->reserve(cols.size());
  for (const auto& c : cols) e->push_back(quantile_edges(c, bins));
  return e;
}

}  // namespace

Ensemble sample_ensemble(const Problem& p, const SkeletonPath& sk, const EnsembleSpec& spec) {
  if (spec.paths < 2) throw InvalidArgument("sample_ensemble: need at least 2 paths");
  Ensemble out;
  out.spec = spec;
  const std::size_t m = final_index_of(sk, spec.t);
  out.final_index = m;
  const std::size_t N = spec.paths;
  const std::size_t pilot = std::min(N, std::max<std::size_t>(spec.budget.pilot, 1));

  // pass A: quantile edges of X_j from pilot paths
  std::vector<std::vector<double>> cols(m, std::vector<double>(pilot));
  for_each_block(pilot, kBlockSize, [&](std::size_t, std::size_t lo, std::size_t hi) {
    PathwiseKernel k(p, sk, spec.eps, m, spec.functional);
    for (std::size_t i = lo; i < hi; ++i) {
      k.simulate({spec.seed, i, 0});
      for (std::size_t j = 0; j < m; ++j) cols[j][i] = k.X()[j];
    }
  });
  const auto edges = edges_from(cols, spec.budget.bins);
  cols.clear();
  cols.shrink_to_fit();

  // pass B: projection statistics
  const std::size_t blocks = (N + kBlockSize - 1) / kBlockSize;
  std::vector<ProjectionAccumulator> acc_g(blocks), acc_gp(blocks);
  for_each_block(N, kBlockSize, [&](std::size_t b, std::size_t lo, std::size_t hi) {
    PathwiseKernel k(p, sk, spec.eps, m, spec.functional);
    ProjectionAccumulator ag(edges), agp(edges);
    for (std::size_t i = lo; i < hi; ++i) {
      k.simulate({spec.seed, i, 0});
      const auto X = k.X();
      const auto gt = k.g_target();
      const auto gpt = k.gprime_target();
      for (std::size_t j = 0; j < m; ++j) {
        ag.add(j, X[j], gt[j]);
        if (spec.gradient) agp.add(j, X[j], gpt[j]);
      }
    }
    acc_g[b] = std::move(ag);
    acc_gp[b] = std::move(agp);
  });
  for (std::size_t b = 1; b < blocks; ++b) {
    acc_g[0].merge(acc_g[b]);
    if (spec.gradient) acc_gp[0].merge(acc_gp[b]);
  }
  out.g = acc_g[0].finalize(spec.budget.min_count, ProjectionMethod::markov_regression);
  if (spec.gradient) out.gprime = acc_gp[0].finalize(spec.budget.min_count, ProjectionMethod::markov_regression);
  acc_g.clear();
  acc_gp.clear();

  // pass C: per-path samples
  out.samples.resize(N);
  std::vector<double> coef;
  if (spec.limit_control) {
    coef = limit_coefficients(p, sk, m, spec.functional);
    out.control.resize(N);
    double v = 0.0;
    for (double c : coef) v += c * c;
    out.control_var = v * sk.h;
  }
  const ProjectionFn g = view(out.g);
  const ProjectionFn gp = spec.gradient ? view(out.gprime) : ProjectionFn([](std::size_t, double) { return 0.0; });
  for_each_block(N, kBlockSize, [&](std::size_t, std::size_t lo, std::size_t hi) {
    PathwiseKernel k(p, sk, spec.eps, m, spec.functional);
    for (std::size_t i = lo; i < hi; ++i) {
      k.simulate({spec.seed, i, 0});
      MalliavinSample s = k.assemble(g, gp, spec.gradient);
      s.path_id = i;
      out.samples[i] = s;
      if (spec.limit_control) {
        const auto dB = k.increments();
        double L = 0.0;
        for (std::size_t j = 0; j < m; ++j) L += coef[j] * dB[j];
        out.control[i] = L;
      }
    }
  });
  return out;
}

std::vector<double> limit_coefficients(const Problem& p, const SkeletonPath& sk, std::size_t m, Functional fn) {
  if (m == 0 || m > sk.n) throw InvalidArgument("limit_coefficients: final index out of range");
  std::vector<double> w(m + 1, 0.0), d1(m + 1, 0.0);
  if (fn == Functional::terminal_state) {
    w[m] = 1.0;
    d1[m] = 1.0;
  } else {
    if (!p.has_f) throw InvalidArgument("problem " + p.label + " has no observable f");
    w = integration_weights(m, sk.h);
    for (std::size_t k = 0; k <= m; ++k) d1[k] = p.f1(sk.t[k], sk.euler_x[k]);
  }
  std::vector<double> Q(m + 1, 1.0);
  for (std::size_t k = 0; k < m; ++k) Q[k + 1] = Q[k] * (1.0 + p.b1(sk.t[k], sk.euler_x[k]) * sk.h);
  std::vector<double> c(m);
  double suffix = 0.0;  // sum_{k>j} w_k phi'_k Q_k
  for (std::size_t j = m; j-- > 0;) {
    suffix += w[j + 1] * d1[j + 1] * Q[j + 1];
    c[j] = p.sigma(sk.t[j], sk.euler_x[j]) * suffix / Q[j + 1];
  }
  return c;
}

// ---------------------------------------------------------------------------
// conditional projection of the closed-form X~ integrand

namespace {

struct LightPath {
  std::vector<double> X, dB, b1, s1;
};

// Euler path from (start, x) over steps [start, m); increments from key
void light_simulate(const Problem& p, const SkeletonPath& sk, double eps, std::size_t start, double x,
                    std::size_t m, const NoiseKey& key, LightPath& lp) {
  const std::size_t steps = m - start;
  lp.X.resize(steps + 1);
  lp.dB.resize(steps);
  lp.b1.resize(steps);
  lp.s1.resize(steps);
  fill_increments(key, sk.h, lp.dB);
  lp.X[0] = x;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = sk.t[start + k], xk = lp.X[k];
    lp.b1[k] = p.b1(t, xk);
    lp.s1[k] = p.sigma1(t, xk);
    lp.X[k + 1] = xk + p.b(t, xk) * sk.h + eps * p.sigma(t, xk) * lp.dB[k];
    if (!std::isfinite(lp.X[k + 1])) throw NumericalError("conditional_projection: non-finite state", start + k + 1);
  }
}

// exp(sum b' h) * prod (1 + eps sigma' dB) over the whole light path
double closed_integrand(const LightPath& lp, double eps, double h) {
  double e = 0.0, z = 1.0;
  for (std::size_t k = 0; k < lp.dB.size(); ++k) {
    e += lp.b1[k] * h;
    z *= 1.0 + eps * lp.s1[k] * lp.dB[k];
  }
  return std::exp(e) * z;
}

constexpr std::uint64_t kBranchSalt = 0x9E3779B97F4A7C15ull;

}  // namespace

ConditionalProjection conditional_projection(const Problem& p, const SkeletonPath& sk, double eps, double t,
                                             ProjectionMethod method, const ProjectionBudget& budget,
                                             std::uint64_t seed) {
  if (!(eps >= 0.0 && eps < 1.0)) throw InvalidArgument("conditional_projection: eps must lie in [0,1)");
  if (budget.paths < 1) throw InvalidArgument("conditional_projection: budget needs paths");
  const std::size_t m = sk.index_of(t);
  const std::size_t N = budget.paths;
  const std::size_t pilot = std::min(N, std::max<std::size_t>(budget.pilot, 1));

  std::vector<std::vector<double>> cols(m + 1, std::vector<double>(pilot));
  for_each_block(pilot, kBlockSize, [&](std::size_t, std::size_t lo, std::size_t hi) {
    LightPath lp;
    for (std::size_t i = lo; i < hi; ++i) {
      light_simulate(p, sk, eps, 0, p.x0, m, {seed, i, 0}, lp);
      for (std::size_t j = 0; j <= m; ++j) cols[j][i] = lp.X[j];
    }
  });
  const auto edges = edges_from(cols, budget.bins);
  cols.clear();

  const std::size_t blocks = (N + kBlockSize - 1) / kBlockSize;
  std::vector<ProjectionAccumulator> acc(blocks);
  for_each_block(N, kBlockSize, [&](std::size_t b, std::size_t lo, std::size_t hi) {
    ProjectionAccumulator a(edges);
    LightPath lp, branch;
    std::vector<double> suffix(m + 1);
    for (std::size_t i = lo; i < hi; ++i) {
      light_simulate(p, sk, eps, 0, p.x0, m, {seed, i, 0}, lp);
      if (method == ProjectionMethod::markov_regression) {
        double e = 0.0, z = 1.0;
        suffix[m] = 1.0;
        for (std::size_t k = m; k-- > 0;) {
          e += lp.b1[k] * sk.h;
          z *= 1.0 + eps * lp.s1[k] * lp.dB[k];
          suffix[k] = std::exp(e) * z;
        }
        for (std::size_t r = 0; r <= m; ++r) a.add(r, lp.X[r], suffix[r]);
      } else {
        for (std::size_t r = 0; r <= m; ++r) {
          if (r == m) {
            a.add(r, lp.X[r], 1.0);
            continue;
          }
          double sum = 0.0;
          for (std::size_t c = 0; c < budget.branches; ++c) {
            const NoiseKey key{seed ^ kBranchSalt, i, static_cast<std::uint32_t>(1 + (r << 20) + c)};
            light_simulate(p, sk, eps, r, lp.X[r], m, key, branch);
            sum += closed_integrand(branch, eps, sk.h);
          }
          a.add(r, lp.X[r], sum / static_cast<double>(budget.branches));
        }
      }
    }
    acc[b] = std::move(a);
  });
  for (std::size_t b = 1; b < blocks; ++b) acc[0].merge(acc[b]);
  return acc[0].finalize(budget.min_count, method);
}

// ---------------------------------------------------------------------------
// field-level assembly

namespace {

double assemble_integral(std::vector<double>& f, std::size_t m, double h, Assembly rule) {
  if (rule == Assembly::simpson) return integrate(std::span<const double>(f.data(), m + 1), h);
  double s = 0.0;
  for (std::size_t r = 0; r < m; ++r) s += f[r];
  return s * h;
}

void require_eps(const PathState& ps) {
  if (!(ps.eps > 0.0)) throw InvalidArgument("functionals of X~ need eps > 0");
}

}  // namespace

ThetaValue theta(const PathState& ps, const DerivativeField& d1, const ProjectionFn& g, std::size_t m, Assembly rule) {
  require_eps(ps);
  if (m > ps.n) throw InvalidArgument("theta: final index out of range");
  std::vector<double> a(m + 1), b(m + 1);
  for (std::size_t r = 0; r <= m; ++r) {
    const double u = ps.sigma[r] * g(r, ps.X[r]);
    a[r] = d1.d(r, m) / ps.eps * u;
    b[r] = u * u;
  }
  return {assemble_integral(a, m, ps.h, rule), assemble_integral(b, m, ps.h, rule)};
}

GradientValue theta_gradient(const PathState& ps, const DerivativeField& d1, const SecondDerivativeField& d2,
                             const ProjectionFn& g, const ProjectionFn& gprime, Assembly rule) {
  require_eps(ps);
  const std::size_t m = d2.final_index;
  const double eps = ps.eps;
  std::vector<double> u(m + 1), q(m + 1);
  for (std::size_t r = 0; r <= m; ++r) {
    const double gv = g(r, ps.X[r]);
    u[r] = ps.sigma[r] * gv;
    q[r] = ps.sigma1[r] * gv + ps.sigma[r] * gprime(r, ps.X[r]);
  }
  std::vector<double> D(m + 1), f(m + 1);
  for (std::size_t th = 0; th <= m; ++th) {
    for (std::size_t r = 0; r <= m; ++r) {
      double v = d2(th, r) / eps * u[r];
      if (r > th) v += d1.d(r, m) / eps * q[r] * d1.d(th, r);
      f[r] = v;
    }
    D[th] = assemble_integral(f, m, ps.h, rule);
  }
  std::vector<double> a(m + 1), b(m + 1);
  for (std::size_t th = 0; th <= m; ++th) {
    a[th] = u[th] * D[th];
    b[th] = D[th] * D[th];
  }
  return {assemble_integral(a, m, ps.h, rule), assemble_integral(b, m, ps.h, rule)};
}

MalliavinSample additive_fields(const Problem& p, const PathState& ps, const DerivativeField& d1,
                                const ProjectionFn& g, const ProjectionFn& gprime, std::size_t m, Assembly rule,
                                bool gradient) {
  require_eps(ps);
  if (!p.has_f) throw InvalidArgument("additive_fields: problem " + p.label + " has no observable f");
  if (m == 0 || m > ps.n) throw InvalidArgument("additive_fields: final index out of range");
  const double eps = ps.eps, h = ps.h;
  const auto w = integration_weights(m, h);
  std::vector<double> f1(m + 1), f2(m + 1);
  for (std::size_t k = 0; k <= m; ++k) {
    f1[k] = p.f1(h * k, ps.X[k]);
    f2[k] = p.f2(h * k, ps.X[k]);
  }
  // D_r Y~ = (1/eps) sum_{k>r} w_k f'_k D_r X_k
  std::vector<double> dY(m + 1, 0.0), u(m + 1), q(m + 1), a(m + 1), b(m + 1);
  for (std::size_t r = 0; r <= m; ++r) {
    double s = 0.0;
    for (std::size_t k = r + 1; k <= m; ++k) s += w[k] * f1[k] * d1.d(r, k);
    dY[r] = s / eps;
    const double gv = g(r, ps.X[r]);
    u[r] = ps.sigma[r] * gv;
    q[r] = ps.sigma1[r] * gv + ps.sigma[r] * gprime(r, ps.X[r]);
    a[r] = dY[r] * u[r];
    b[r] = u[r] * u[r];
  }
  MalliavinSample out;
  out.path_id = ps.path_id;
  out.theta = assemble_integral(a, m, h, rule);
  out.u_norm2 = assemble_integral(b, m, h, rule);
  if (!gradient) return out;

  // second derivatives of X_k for every final index k
  const FieldMethod second = d1.provenance == FieldMethod::pathwise ? FieldMethod::pathwise : FieldMethod::variational;
  std::vector<SecondDerivativeField> d2(m + 1);
  for (std::size_t k = 1; k <= m; ++k) d2[k] = malliavin_second(p, ps, d1, h * k, second);

  std::vector<double> D(m + 1), fr(m + 1);
  for (std::size_t th = 0; th <= m; ++th) {
    for (std::size_t r = 0; r <= m; ++r) {
      double dd = 0.0;
      for (std::size_t k = std::max(th, r) + 1; k <= m; ++k)
        dd += w[k] * (f2[k] * d1.d(th, k) * d1.d(r, k) + f1[k] * d2[k](th, r));
      double v = dd / eps * u[r];
      if (r > th) v += dY[r] * q[r] * d1.d(th, r);
      fr[r] = v;
    }
    D[th] = assemble_integral(fr, m, h, rule);
  }
  for (std::size_t th = 0; th <= m; ++th) {
    a[th] = u[th] * D[th];
    b[th] = D[th] * D[th];
  }
  out.dtheta_u = assemble_integral(a, m, h, rule);
  out.dtheta_norm2 = assemble_integral(b, m, h, rule);
  return out;
}

// ---------------------------------------------------------------------------
// negative moments

NegativeMoment negative_moment(std::span<const double> samples, double p0) {
  if (!(p0 > 0.0)) throw InvalidArgument("negative_moment: p0 must be positive");
  const std::size_t n = samples.size();
  if (n == 0) throw InvalidArgument("negative_moment: no samples");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(samples[i] > 0.0))
      throw InvalidArgument("negative_moment: nonpositive sample at path " + std::to_string(i));
    v[i] = std::pow(samples[i], -p0);
  }
  // shifted accumulation: exact for constant input
  const double c = v[0];
  double s = 0.0, ss = 0.0;
  for (double x : v) {
    s += x - c;
    ss += (x - c) * (x - c);
  }
  NegativeMoment out;
  const double nn = static_cast<double>(n);
  out.estimate = c + s / nn;
  const double var = n > 1 ? std::max(0.0, (ss - s * s / nn) / (nn - 1.0)) : 0.0;
  out.std_error = std::sqrt(var / nn);
  // leave-one-out means differ from the full mean by (mean - x_i)/(n-1)
  if (n > 1) {
    double jk = 0.0;
    for (double x : v) {
      const double d = (out.estimate - x) / (nn - 1.0);
      jk += d * d;
    }
    out.tail.jackknife_se = std::sqrt((nn - 1.0) / nn * jk);
  }
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  const double total = out.estimate * nn;
  double top = 0.0;
  for (std::size_t i = 0; i < std::min<std::size_t>(5, n); ++i) top += sorted[i];
  out.tail.top5_share = total > 0 ? top / total : 0.0;
  const std::size_t drop = n / 1000;
  double rest = 0.0;
  for (std::size_t i = drop; i < n; ++i) rest += sorted[i] - c;
  out.tail.trimmed_estimate = c + rest / static_cast<double>(n - drop);
  return out;
}

VolterraTable volterra_negative_moment_check(const Problem& p, double eps, double p0, std::span<const double> t_list,
                                             std::size_t paths, std::size_t n, std::uint64_t seed) {
  if (t_list.empty()) throw InvalidArgument("volterra check: empty t list");
  if (paths < 1) throw InvalidArgument("volterra check: need paths");
  if (!(eps >= 0.0 && eps < 1.0)) throw InvalidArgument("volterra check: eps must lie in [0,1)");
  if (p.sigma(0.0, p.x0) == 0.0) throw InvalidArgument("volterra check: sigma(0, X0) must be nonzero");
  const SkeletonPath sk = solve_skeleton(p, n);
  std::vector<std::size_t> idx;
  for (double t : t_list) {
    const std::size_t m = sk.index_of(t);
    if (m == 0) throw InvalidArgument("volterra check: t must be positive");
    idx.push_back(m);
  }
  const std::size_t mmax = *std::max_element(idx.begin(), idx.end());
  const std::size_t T = idx.size();
  std::vector<std::vector<double>> I1(T, std::vector<double>(paths)), I2(T, std::vector<double>(paths));
  for_each_block(paths, kBlockSize, [&](std::size_t, std::size_t lo, std::size_t hi) {
    std::vector<double> dB(mmax), s2(mmax + 1), buf(mmax + 1);
    for (std::size_t i = lo; i < hi; ++i) {
      fill_increments({seed, i, 0}, sk.h, dB);
      double x = p.x0;
      for (std::size_t k = 0;; ++k) {
        const double t = sk.t[k];
        const double s = p.sigma(t, x);
        s2[k] = s * s;
        if (k == mmax) break;
        x += p.b(t, x) * sk.h + eps * s * dB[k];
        if (!std::isfinite(x)) throw NumericalError("volterra check: non-finite state", k + 1);
      }
      for (std::size_t j = 0; j < T; ++j) {
        const std::size_t m = idx[j];
        I1[j][i] = integrate(std::span<const double>(s2.data(), m + 1), sk.h);
        for (std::size_t r = 0; r <= m; ++r) {
          const double d = sk.t[m] - sk.t[r];
          buf[r] = d * d * s2[r];
        }
        I2[j][i] = integrate(std::span<const double>(buf.data(), m + 1), sk.h);
      }
    }
  });
  VolterraTable tab;
  std::vector<double> lt, l1, l2;
  for (std::size_t j = 0; j < T; ++j) {
    const double t = sk.t[idx[j]];
    VolterraRow a{VolterraKernel::constant, t, negative_moment(I1[j], p0)};
    VolterraRow b{VolterraKernel::quadratic, t, negative_moment(I2[j], p0)};
    lt.push_back(std::log(t));
    l1.push_back(std::log(a.moment.estimate));
    l2.push_back(std::log(b.moment.estimate));
    tab.rows.push_back(a);
    tab.rows.push_back(b);
  }
  tab.expected_constant = -p0;
  tab.expected_quadratic = -3.0 * p0;
  if (T >= 2) {
    tab.slope_constant = ols(lt, l1).slope;
    tab.slope_quadratic = ols(lt, l2).slope;
  }
  return tab;
}

double skorokhod_lower_functional(const LimitPair& lp, std::size_t t_index, FieldMethod method) {
  if (t_index > lp.model->n) throw InvalidArgument("skorokhod functional: index out of range");
  const auto dv = lp.dv_column(t_index, method);
  const auto du = lp.du_column(t_index, method);
  double pair = 0.0;
  for (std::size_t r = 0; r < t_index; ++r) pair += dv[r] * du[r];
  return lp.V[t_index] * lp.U[t_index] - pair * lp.model->h;
}

}  // namespace snfl
