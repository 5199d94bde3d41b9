#include "snfl/experiment.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "snfl/error.hpp"
#include "snfl/kernel_regression.hpp"
#include "snfl/parallel.hpp"
#include "snfl/path_engine.hpp"
#include "snfl/skeleton.hpp"

namespace snfl {

using json = nlohmann::json;

std::vector<double> default_eps_grid() { return {0.4, 0.283, 0.2, 0.141, 0.1, 0.0707, 0.05}; }

void SweepPlan::validate() const {
  if (eps.empty()) throw InvalidArgument("plan: eps list is empty");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0 && eps[i] < 1.0)) throw InvalidArgument("plan: eps values must lie in (0,1)");
    if (i > 0 && !(eps[i] < eps[i - 1])) throw InvalidArgument("plan: eps values must be strictly decreasing");
  }
  if (paths < 1000) throw InvalidArgument("plan: paths must be >= 1000");
  if (mesh < 2 || (mesh & (mesh - 1)) != 0) throw InvalidArgument("plan: mesh must be a power of two >= 2");
  if (!(t > 0.0)) throw InvalidArgument("plan: t must be positive");
  if (!(p0 > 0.0)) throw InvalidArgument("plan: p0 must be positive");
  if (estimator.knots < 2) throw InvalidArgument("plan: estimator.knots must be >= 2");
  if (!(estimator.bandwidth_multiplier > 0.0)) throw InvalidArgument("plan: bandwidth multiplier must be positive");
  if (estimator.bins < 1) throw InvalidArgument("plan: estimator.bins must be >= 1");
}

std::string to_json(const SweepPlan& p) {
  json j;
  j["problem"] = p.problem;
  j["config"] = p.config;
  j["t"] = p.t;
  j["eps"] = p.eps;
  j["paths"] = p.paths;
  j["mesh"] = p.mesh;
  j["seed"] = p.seed;
  j["functional"] = to_string(p.functional);
  j["p0"] = p.p0;
  j["estimator"] = {{"knots", p.estimator.knots},
                    {"bandwidth_multiplier", p.estimator.bandwidth_multiplier},
                    {"bins", p.estimator.bins},
                    {"min_count", p.estimator.min_count},
                    {"pilot", p.estimator.pilot}};
  return j.dump(2);
}

SweepPlan plan_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("plan is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidArgument("plan must be a JSON object");
  SweepPlan p;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const json& v = it.value();
      if (k == "problem") p.problem = v.get<std::string>();
      else if (k == "config") p.config = v.get<std::string>();
      else if (k == "t") p.t = v.get<double>();
      else if (k == "eps") p.eps = v.get<std::vector<double>>();
      else if (k == "paths") p.paths = v.get<std::size_t>();
      else if (k == "mesh") p.mesh = v.get<std::size_t>();
      else if (k == "seed") p.seed = v.get<std::uint64_t>();
      else if (k == "p0") p.p0 = v.get<double>();
      else if (k == "functional") {
        const auto s = v.get<std::string>();
        if (s == "terminal_state") p.functional = Functional::terminal_state;
        else if (s == "additive") p.functional = Functional::additive;
        else throw InvalidArgument("plan: unknown functional '" + s + "'");
      } else if (k == "estimator") {
        for (auto e = v.begin(); e != v.end(); ++e) {
          if (e.key() == "knots") p.estimator.knots = e.value().get<std::size_t>();
          else if (e.key() == "bandwidth_multiplier") p.estimator.bandwidth_multiplier = e.value().get<double>();
          else if (e.key() == "bins") p.estimator.bins = e.value().get<std::size_t>();
          else if (e.key() == "min_count") p.estimator.min_count = e.value().get<std::size_t>();
          else if (e.key() == "pilot") p.estimator.pilot = e.value().get<std::size_t>();
          else throw InvalidArgument("plan: unknown estimator key '" + e.key() + "'");
        }
      } else {
        throw InvalidArgument("plan: unknown key '" + k + "'");
      }
    }
  } catch (const json::type_error& e) {
    throw InvalidArgument(std::string("plan: wrong value type: ") + e.what());
  }
  return p;
}

Problem resolve_problem(const SweepPlan& plan) {
  Problem p = plan.config.empty() ? builtin(plan.problem) : load_problem_file(plan.config);
  if (plan.t > p.horizon * (1.0 + 1e-12)) throw InvalidArgument("plan: t exceeds the problem horizon");
  return p;
}

const NamedFit* SweepResult::fit(std::string_view q) const {
  for (const auto& f : fits)
    if (f.quantity == q) return &f;
  return nullptr;
}

// ---------------------------------------------------------------------------

namespace {

struct Moments {
  double mean = 0.0, se = 0.0, var = 0.0;
};

Moments moments(std::span<const double> v) {
  Moments m;
  const double n = static_cast<double>(v.size());
  if (v.empty()) return m;
  const double c = v[0];
  double s = 0.0, ss = 0.0;
  for (double x : v) {
    s += x - c;
    ss += (x - c) * (x - c);
  }
  m.mean = c + s / n;
  m.var = v.size() > 1 ? std::max(0.0, (ss - s * s / n) / (n - 1.0)) : 0.0;
  m.se = std::sqrt(m.var / n);
  return m;
}

double target_variance(const Problem& p, const SkeletonPath& sk, double t, Functional fn) {
  return fn == Functional::terminal_state ? beta_variance(p, sk, t) : gamma_variance(p, sk, t);
}

BoundComponents components_of(const Ensemble& e, double target, const DistanceReport& rep) {
  BoundComponents b;
  b.eps = e.spec.eps;
  b.t = e.spec.t;
  b.target_var = target;
  const std::size_t N = e.samples.size();
  const double n = static_cast<double>(N);
  std::vector<double> F(N), D(N), th(N), q(N), u8(N);
  for (std::size_t i = 0; i < N; ++i) {
    const auto& s = e.samples[i];
    F[i] = s.F;
    D[i] = s.F - e.control[i];
    th[i] = s.theta;
    q[i] = s.dtheta_norm2 * s.dtheta_norm2;
    const double u2 = s.u_norm2 * s.u_norm2;
    u8[i] = u2 * u2;
  }
  // mean: E F = E[F - L] because the limit term L is centered
  const Moments md = moments(D);
  b.mean = md.mean;
  b.mean_se = md.se;
  b.mean_sq = md.mean * md.mean;
  b.mean_sq_se = 2.0 * std::abs(md.mean) * md.se;

  // Var F = Var L (exact) + Var D + 2 Cov(L, D)
  const Moments ml = moments(e.control);
  double cov = 0.0;
  for (std::size_t i = 0; i < N; ++i) cov += (e.control[i] - ml.mean) * (D[i] - md.mean);
  cov /= (n - 1.0);
  const double delta = md.var + 2.0 * cov;
  double infl_ss = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double dd = D[i] - md.mean, dl = e.control[i] - ml.mean;
    const double psi = dd * dd + 2.0 * dl * dd - delta;
    infl_ss += psi * psi;
  }
  b.var = e.control_var + delta;
  b.var_se = std::sqrt(infl_ss / (n - 1.0) / n);
  const double gap = b.var - target;
  b.var_gap_sq = gap * gap;
  b.var_gap_sq_se = 2.0 * std::abs(gap) * b.var_se;

  const Moments mf = moments(F);
  double m4 = 0.0;
  for (double x : F) {
    const double d = x - mf.mean;
    m4 += d * d * d * d;
  }
  m4 /= n;
  b.sample_var = mf.var;
  b.sample_var_se = std::sqrt(std::max(0.0, m4 - mf.var * mf.var) / n);

  const Moments mt = moments(th);
  b.theta_mean = mt.mean;
  b.theta_mean_se = mt.se;

  const Moments mq = moments(q);
  b.dtheta4_root = std::sqrt(mq.mean);
  b.dtheta4_root_se = mq.mean > 0.0 ? mq.se / (2.0 * b.dtheta4_root) : 0.0;

  b.theta_neg8 = negative_moment(th, 8.0).estimate;
  b.theta_neg16 = negative_moment(th, 16.0).estimate;
  b.u8 = moments(u8).mean;
  const double s4 = target * target;
  b.A = std::pow(b.u8 * b.theta_neg8, 0.25) / s4;
  b.C = b.A + std::pow(b.u8 * b.theta_neg16, 0.25);
  b.term_mean = b.mean_sq / s4;
  b.term_var = b.A * b.var_gap_sq;
  b.term_dtheta = b.C * b.dtheta4_root;
  b.bound = b.term_mean + b.term_var + b.term_dtheta;
  b.fisher = rep.fisher;
  b.fisher_se = rep.fisher_se;
  b.envelope_flag = rep.fisher > 50.0 * b.bound;
  return b;
}

SweepPoint run_point_on(const Problem& p, const SkeletonPath& sk, double target, const SweepPlan& plan, double eps) {
  SweepPoint pt;
  pt.eps = eps;
  try {
    EnsembleSpec spec;
    spec.eps = eps;
    spec.t = plan.t;
    spec.paths = plan.paths;
    spec.seed = plan.seed;
    spec.functional = plan.functional;
    spec.budget.bins = plan.estimator.bins;
    spec.budget.min_count = plan.estimator.min_count;
    spec.budget.pilot = plan.estimator.pilot;
    spec.gradient = true;
    spec.limit_control = true;
    const Ensemble e = sample_ensemble(p, sk, spec);

    // the simulated law's own Gaussian limit: N(0, h sum c_j^2)
    const double limit_var = e.control_var;
    std::vector<double> F(e.samples.size());
    for (std::size_t i = 0; i < F.size(); ++i) F[i] = e.samples[i].F;
    ScoreOptions so;
    so.knots = plan.estimator.knots;
    so.bandwidth_multiplier = plan.estimator.bandwidth_multiplier;
    ScoreModel sm;
    const FisherEstimate fe = fisher_by_regression(e.samples, 0.0, limit_var, so, &sm);
    const KolmogorovEstimate ke = kolmogorov_distance(F, 0.0, limit_var);

    DistanceReport& r = pt.report;
    r.eps = eps;
    r.t = plan.t;
    r.n = F.size();
    r.mu = 0.0;
    r.var = limit_var;
    r.fisher = fe.estimate;
    r.fisher_se = fe.std_error;
    r.kolmogorov = ke.estimate;
    r.kolmogorov_band = ke.band;
    r.method = to_string(sm.method);
    r.bandwidth = sm.bandwidth;
    r.outside_fraction = fe.outside_fraction;
    r.warning = fe.warning;
    pt.components = components_of(e, target, r);
    pt.ok = true;
  } catch (const std::exception& ex) {
    pt.ok = false;
    pt.error = ex.what();
  }
  return pt;
}

void add_fit(SweepResult& res, const std::string& name, const std::vector<RatePoint>& pts) {
  NamedFit nf;
  nf.quantity = name;
  try {
    nf.fit = rate_fit(pts);
  } catch (const Error& e) {
    nf.error = e.what();
  }
  res.fits.push_back(std::move(nf));
}

}  // namespace

SweepPoint run_point(const Problem& p, const SweepPlan& plan, double eps) {
  const SkeletonPath sk = solve_skeleton(p, plan.mesh);
  return run_point_on(p, sk, target_variance(p, sk, plan.t, plan.functional), plan, eps);
}

SweepResult sweep(const Problem& p, const SweepPlan& plan) {
  plan.validate();
  if (plan.t > p.horizon * (1.0 + 1e-12)) throw InvalidArgument("plan: t exceeds the problem horizon");
  if (plan.functional == Functional::additive && !p.has_f)
    throw InvalidArgument("problem " + p.label + " has no observable f");
  SweepResult res;
  res.plan = plan;
  res.label = p.label;
  const SkeletonPath sk = solve_skeleton(p, plan.mesh);
  sk.index_of(plan.t);
  res.target_var = target_variance(p, sk, plan.t, plan.functional);
  for (double eps : plan.eps) res.points.push_back(run_point_on(p, sk, res.target_var, plan, eps));

  std::vector<RatePoint> fisher, kol, msq, vgap, dth, amean, avar;
  for (const auto& pt : res.points) {
    if (!pt.ok) continue;
    const auto& r = pt.report;
    const auto& c = pt.components;
    fisher.push_back({pt.eps, r.fisher, r.fisher_se});
    kol.push_back({pt.eps, r.kolmogorov, kKolmogorovNullSd / std::sqrt(static_cast<double>(r.n))});
    msq.push_back({pt.eps, c.mean_sq, c.mean_sq_se});
    vgap.push_back({pt.eps, c.var_gap_sq, c.var_gap_sq_se});
    dth.push_back({pt.eps, c.dtheta4_root, c.dtheta4_root_se});
    amean.push_back({pt.eps, std::abs(c.mean), c.mean_se});
    avar.push_back({pt.eps, std::abs(c.var - c.target_var), c.var_se});
  }
  add_fit(res, "fisher", fisher);
  add_fit(res, "kolmogorov", kol);
  add_fit(res, "mean_sq", msq);
  add_fit(res, "var_gap_sq", vgap);
  add_fit(res, "dtheta4_root", dth);
  if (plan.functional == Functional::additive) {
    add_fit(res, "abs_mean", amean);
    add_fit(res, "abs_var_gap", avar);
  }
  return res;
}

SweepResult sweep(const SweepPlan& plan) {
  plan.validate();
  return sweep(resolve_problem(plan), plan);
}

SweepResult additive_sweep(const Problem& p, SweepPlan plan) {
  plan.functional = Functional::additive;
  return sweep(p, plan);
}

SweepResult additive_sweep(SweepPlan plan) {
  plan.functional = Functional::additive;
  return sweep(plan);
}

BoundComponents bound_components(const Problem& p, const SweepPlan& plan) {
  if (plan.eps.size() != 1) throw InvalidArgument("bound_components: plan must hold exactly one eps");
  plan.validate();
  const SweepPoint pt = run_point(p, plan, plan.eps[0]);
  if (!pt.ok) throw Error("bound_components: " + pt.error);
  return pt.components;
}

// ---------------------------------------------------------------------------
// lower bound

namespace {

double conditional_abs_mean(std::span<const double> U, std::span<const double> delta) {
  std::vector<double> sorted(U.begin(), U.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> knots(128);
  for (std::size_t j = 0; j < knots.size(); ++j)
    knots[j] = quantile_sorted(sorted, 0.005 + 0.99 * static_cast<double>(j) / (knots.size() - 1));
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  const double bw = silverman_bandwidth(U);
  ScoreModel table;
  table.knots = knots;
  table.values = local_linear(U, delta, knots, bw);
  double s = 0.0;
  for (double u : U) s += std::abs(table(u));
  return s / static_cast<double>(U.size());
}

}  // namespace

LowerBoundResult lower_bound_experiment(const Problem& p, double t, std::size_t paths, std::size_t mesh,
                                        std::uint64_t seed, const SweepResult* sw) {
  if (paths < 1600) throw InvalidArgument("lower_bound_experiment: need at least 1600 paths");
  const SkeletonPath sk = solve_skeleton(p, mesh);
  const std::size_t m = sk.index_of(t);
  if (m == 0) throw InvalidArgument("lower_bound_experiment: t must be positive");
  const auto model = limit_model(p, sk);
  LowerBoundResult res;
  res.t = t;
  res.paths = paths;
  res.beta2 = beta_variance(p, sk, t);
  std::vector<double> U(paths), delta(paths);
  for_each_block(paths, kBlockSize, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const LimitPair lp = simulate_limit_pair(model, noise(seed, i, sk.n, sk.T));
      U[i] = lp.U[m];
      delta[i] = skorokhod_lower_functional(lp, m);
    }
  });
  const Moments md = moments(delta);
  res.mean_delta = md.mean;
  res.mean_delta_se = md.se;
  const double b4 = 4.0 * res.beta2 * res.beta2;
  // V == 0 problems give delta == 0 identically: no regression needed
  const bool trivial = std::all_of(delta.begin(), delta.end(), [](double d) { return d == 0.0; });
  if (!trivial) {
    res.mean_abs_conditional = conditional_abs_mean(U, delta);
    res.lower = res.mean_abs_conditional * res.mean_abs_conditional / b4;
    constexpr std::size_t kGroups = 16;
    std::vector<double> lg;
    const std::size_t gsz = paths / kGroups;
    for (std::size_t g = 0; g < kGroups; ++g) {
      const std::span<const double> u(U.data() + g * gsz, gsz), d(delta.data() + g * gsz, gsz);
      const double a = conditional_abs_mean(u, d);
      lg.push_back(a * a / b4);
    }
    res.lower_se = moments(lg).se;
  }
  if (sw) {
    for (const auto& pt : sw->points) {
      if (!pt.ok) continue;
      LowerComparison c;
      c.eps = pt.eps;
      const double e2 = pt.eps * pt.eps;
      c.ratio = pt.report.fisher / e2;
      c.ratio_se = pt.report.fisher_se / e2;
      c.consistent = c.ratio >= res.lower - 2.0 * std::sqrt(c.ratio_se * c.ratio_se + res.lower_se * res.lower_se);
      res.comparison.push_back(c);
    }
  }
  return res;
}

}  // namespace snfl
