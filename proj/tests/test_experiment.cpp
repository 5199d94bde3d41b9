#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "snfl/error.hpp"
#include "snfl/experiment.hpp"
#include "snfl/persistence.hpp"
#include "snfl/rate_fit.hpp"

using namespace snfl;
namespace fs = std::filesystem;

namespace {

SweepPlan small_plan(const char* problem, std::size_t paths, std::vector<double> eps) {
  SweepPlan plan;
  plan.problem = problem;
  plan.paths = paths;
  plan.mesh = 32;
  plan.seed = 5;
  plan.eps = std::move(eps);
  return plan;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("snfl-test-" + name);
  fs::remove_all(d);
  return d;
}

std::string reports_text(const SweepResult& r) {
  std::ostringstream os;
  write_reports_csv(r.points, os);
  return os.str();
}

}  // namespace

TEST_CASE("rate fit recovers exact power laws") {
  std::vector<RatePoint> sq, lin;
  for (double e : {0.4, 0.2, 0.1, 0.05}) {
    sq.push_back({e, e * e, 0.0});
    lin.push_back({e, 3.0 * e, 0.0});
  }
  const RateFit a = rate_fit(sq);
  CHECK(a.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(a.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.intercept == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  const RateFit b = rate_fit(lin);
  CHECK(b.slope == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("rate fit drops points under the noise floor") {
  std::vector<RatePoint> pts;
  int sign = 1;
  for (double e = 0.4; e > 1e-4; e /= 2.0) {
    pts.push_back({e, e * e * (1.0 + 0.01 * sign) + 1e-7, 1e-6});
    sign = -sign;
  }
  const RateFit f = rate_fit(pts);
  CHECK_FALSE(f.excluded.empty());
  for (const auto& p : f.excluded) CHECK(p.value < kNoiseFloor * p.std_error);
  for (const auto& p : f.used) CHECK(p.value >= kNoiseFloor * p.std_error);
  CHECK(f.slope == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("rate fit needs three usable points") {
  const std::vector<RatePoint> two = {{0.2, 0.04, 0.0}, {0.1, 0.01, 0.0}};
  CHECK_THROWS_AS(rate_fit(two), InsufficientSignal);
  const std::vector<RatePoint> buried = {{0.2, 0.04, 0.0}, {0.1, 0.01, 0.0}, {0.05, 1e-4, 1e-3}};
  try {
    rate_fit(buried);
    FAIL("expected InsufficientSignal");
  } catch (const InsufficientSignal& e) {
    CHECK(std::string(e.what()).find("insufficient signal") != std::string::npos);
  }
}

TEST_CASE("ordinary least squares") {
  const std::vector<double> x = {0.0, 1.0}, y = {1.0, 3.0};
  const LinearFit f = ols(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.slope_se == 0.0);
}

TEST_CASE("plan JSON") {
  SweepPlan p = small_plan("P3", 5000, {0.3, 0.1});
  p.functional = Functional::additive;
  p.estimator.knots = 64;
  p.p0 = 3.0;
  const SweepPlan q = plan_from_json(to_json(p));
  CHECK(q.problem == "P3");
  CHECK(q.eps == p.eps);
  CHECK(q.paths == 5000);
  CHECK(q.mesh == 32);
  CHECK(q.seed == 5);
  CHECK(q.p0 == 3.0);
  CHECK(q.functional == Functional::additive);
  CHECK(q.estimator.knots == 64);
  CHECK(to_json(q) == to_json(p));

  CHECK(plan_from_json("{}").eps == default_eps_grid());
  CHECK_THROWS_AS(plan_from_json(R"js({"paths": 2000, "colour": 1})js"), InvalidArgument);
  CHECK_THROWS_AS(plan_from_json(R"js({"estimator": {"kernel": "box"}})js"), InvalidArgument);
  CHECK_THROWS_AS(plan_from_json(R"js({"paths": "many"})js"), InvalidArgument);
  CHECK_THROWS_AS(plan_from_json("[1, 2"), InvalidArgument);
}

TEST_CASE("plan validation") {
  CHECK_NOTHROW(small_plan("P1", 1000, {0.2, 0.1}).validate());
  CHECK_THROWS_AS(small_plan("P1", 1000, {0.1, 0.2}).validate(), InvalidArgument);
  CHECK_THROWS_AS(small_plan("P1", 1000, {0.2, 0.2}).validate(), InvalidArgument);
  CHECK_THROWS_AS(small_plan("P1", 1000, {1.5}).validate(), InvalidArgument);
  CHECK_THROWS_AS(small_plan("P1", 1000, {}).validate(), InvalidArgument);
  CHECK_THROWS_AS(small_plan("P1", 999, {0.1}).validate(), InvalidArgument);
  SweepPlan m = small_plan("P1", 1000, {0.1});
  m.mesh = 48;
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
  SweepPlan t = small_plan("P1", 1000, {0.1});
  t.t = 5.0;
  CHECK_THROWS_AS(resolve_problem(t), InvalidArgument);
  CHECK_THROWS_AS(resolve_problem(small_plan("NOPE", 1000, {0.1})), InvalidArgument);
}

TEST_CASE("linear problems sit at the noise floor") {
  const SweepResult r = sweep(small_plan("P1", 32000, {0.4, 0.2, 0.1}));
  REQUIRE(r.points.size() == 3);
  for (const auto& pt : r.points) {
    REQUIRE(pt.ok);
    CAPTURE(pt.eps);
    CHECK(pt.report.fisher <= pt.report.fisher_se);
    CHECK(pt.report.kolmogorov <= pt.report.kolmogorov_band);
    CHECK(pinsker_check(pt.report).pass);
  }
  const NamedFit* f = r.fit("fisher");
  REQUIRE(f);
  CHECK_FALSE(f->fit.has_value());
  CHECK(f->error.find("insufficient signal") != std::string::npos);

  const SweepResult o = sweep(small_plan("P0", 20000, {0.3, 0.1}));
  for (const auto& pt : o.points) {
    REQUIRE(pt.ok);
    CHECK(pt.report.kolmogorov <= pt.report.kolmogorov_band);
    CHECK(pt.components.var_gap_sq < 1e-20);
  }
}

TEST_CASE("nonlinear sweep decreases with eps and is reproducible") {
  const SweepPlan plan = small_plan("P2", 20000, {0.4, 0.2, 0.1});
  const SweepResult a = sweep(plan);
  for (std::size_t k = 1; k < a.points.size(); ++k) {
    REQUIRE(a.points[k].ok);
    CHECK(a.points[k].report.fisher <= a.points[k - 1].report.fisher + a.points[k - 1].report.fisher_se);
  }
  for (const auto& pt : a.points) {
    CHECK_FALSE(pt.components.envelope_flag);
    CHECK(pt.components.bound > 0.0);
    CHECK(pinsker_check(pt.report).pass);
  }
  CHECK(reports_text(a) == reports_text(sweep(plan)));
}

TEST_CASE("bound components need exactly one eps") {
  CHECK_THROWS_AS(bound_components(builtin("P2"), small_plan("P2", 2000, {0.2, 0.1})), InvalidArgument);
  const BoundComponents c = bound_components(builtin("P2"), small_plan("P2", 4000, {0.2}));
  CHECK(c.eps == 0.2);
  CHECK(c.A > 0.0);
  CHECK(c.C >= c.A);
  CHECK(c.bound == doctest::Approx(c.term_mean + c.term_var + c.term_dtheta));
}

TEST_CASE("additive sweep of a linear observable") {
  const Problem p = with_observable(builtin("P1"), "x", "1", "0");
  const SweepResult r = additive_sweep(p, small_plan("P1", 20000, {0.3, 0.1}));
  for (const auto& pt : r.points) {
    REQUIRE(pt.ok);
    CHECK(pt.report.fisher <= 2.0 * pt.report.fisher_se);
  }
}

TEST_CASE("lower bound vanishes for Gaussian problems") {
  for (const char* name : {"P0", "P1"}) {
    CAPTURE(std::string(name));
    const LowerBoundResult lb = lower_bound_experiment(builtin(name), 1.0, 4000, 32, 3);
    CHECK(lb.lower == 0.0);
    CHECK(lb.mean_abs_conditional == 0.0);
  }
  CHECK_THROWS_AS(lower_bound_experiment(builtin("P2"), 1.0, 1000, 32, 3), InvalidArgument);
}

TEST_CASE("persisted sweep round trip") {
  const SweepResult r = sweep(small_plan("P2", 8000, {0.4, 0.2, 0.1}));
  const fs::path dir = scratch_dir("persist");
  fs::create_directories(dir);
  write_sweep(dir, r);
  for (const char* f : {"plan.json", "reports.csv", "ratefits.csv", "bound_components.csv", "meta.json"})
    CHECK(fs::exists(dir / f));

  const PersistedRun run = read_run(dir);
  CHECK(to_json(run.plan) == to_json(r.plan));
  REQUIRE(run.reports.size() == r.points.size());
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    CHECK(run.reports[i].report.eps == r.points[i].report.eps);
    CHECK(run.reports[i].report.fisher == r.points[i].report.fisher);
    CHECK(run.reports[i].report.fisher_se == r.points[i].report.fisher_se);
    CHECK(run.reports[i].report.kolmogorov == r.points[i].report.kolmogorov);
  }
  REQUIRE(run.components.size() == r.points.size());
  CHECK(run.components[1].bound == r.points[1].components.bound);
  for (const auto& nf : r.fits) {
    const PersistedFit* pf = run.fit(nf.quantity);
    REQUIRE(pf);
    CHECK(pf->ok == nf.fit.has_value());
    if (nf.fit) CHECK(pf->slope == nf.fit->slope);
  }

  fs::remove(dir / "ratefits.csv");
  CHECK_THROWS_AS(read_run(dir), Error);
  CHECK_THROWS_AS(read_run(scratch_dir("missing")), Error);
  fs::remove_all(dir);
}

TEST_CASE("run directories never clobber") {
  const fs::path root = scratch_dir("runs");
  const fs::path a = make_run_directory("demo", "", root);
  const fs::path b = make_run_directory("demo", "", root);
  CHECK(a != b);
  CHECK(fs::is_directory(a));
  CHECK(fs::is_directory(b));
  CHECK(a.filename().string().find("-demo") != std::string::npos);
  fs::remove_all(root);
}
