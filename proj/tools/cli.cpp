#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "snfl/error.hpp"
#include "snfl/experiment.hpp"
#include "snfl/persistence.hpp"
#include "snfl/problem.hpp"

namespace snfl::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw InvalidArgument("cannot read " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw InvalidArgument("--eps: not a number: '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw InvalidArgument("--eps: empty list");
  return out;
}

// flags shared by the plan-driven verbs; unset flags leave the plan alone
struct PlanFlags {
  std::string plan_file, problem, config, eps, out;
  double t = 0.0, p0 = 0.0;
  std::size_t paths = 0, mesh = 0;
  std::uint64_t seed = 0;
  CLI::Option *o_problem = nullptr, *o_config = nullptr, *o_t = nullptr, *o_eps = nullptr, *o_paths = nullptr,
              *o_mesh = nullptr, *o_seed = nullptr, *o_p0 = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--plan", plan_file, "JSON plan file; flags override its values");
    o_problem = app->add_option("--problem", problem, "builtin problem name or prefix (P0..P3)");
    o_config = app->add_option("--config", config, "problem configuration file (JSON)");
    o_t = app->add_option("--t", t, "observation time");
    o_eps = app->add_option("--eps", eps, "comma-separated eps list, strictly decreasing");
    o_paths = app->add_option("--paths", paths, "Monte Carlo paths per eps");
    o_mesh = app->add_option("--mesh", mesh, "time steps (power of two)");
    o_seed = app->add_option("--seed", seed, "master seed");
    o_p0 = app->add_option("--p0", p0, "negative moment exponent (volterra)");
    app->add_option("--out", out, "output directory (default runs/<timestamp>-<label>)");
  }

  SweepPlan resolve() const {
    SweepPlan plan = plan_file.empty() ? SweepPlan{} : plan_from_json(read_text(plan_file));
    if (o_problem->count()) {
      plan.problem = problem;
      if (!o_config->count()) plan.config.clear();
    }
    if (o_config->count()) plan.config = config;
    if (o_t->count()) plan.t = t;
    if (o_eps->count()) plan.eps = parse_list(eps);
    if (o_paths->count()) plan.paths = paths;
    if (o_mesh->count()) plan.mesh = mesh;
    if (o_seed->count()) plan.seed = seed;
    if (o_p0->count()) plan.p0 = p0;
    return plan;
  }
};

std::string label_of(const Problem& p) {
  std::string s = p.label;
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
  return s;
}

int do_sweep(const PlanFlags& f, Functional fn, std::string_view verb, std::ostream& out) {
  SweepPlan plan = f.resolve();
  plan.functional = fn;
  plan.validate();
  const Problem p = resolve_problem(plan);
  const SweepResult r = sweep(p, plan);
  const fs::path dir = make_run_directory(label_of(p), f.out);
  write_sweep(dir, r, verb);
  out << "run directory: " << dir.string() << "\n\n" << render_report(dir);
  return 0;
}

int do_bound(const PlanFlags& f, std::ostream& out) {
  SweepPlan plan = f.resolve();
  if (!f.o_eps->count()) plan.eps = {0.1};
  if (plan.eps.size() != 1) throw InvalidArgument("bound: --eps must hold exactly one value");
  plan.validate();
  const Problem p = resolve_problem(plan);
  const SweepResult r = sweep(p, plan);
  const fs::path dir = make_run_directory(label_of(p), f.out);
  write_sweep(dir, r, "bound");
  const auto& pt = r.points.front();
  if (!pt.ok) throw Error("bound: " + pt.error);
  const auto& c = pt.components;
  out << "run directory: " << dir.string() << "\n";
  out << "eps " << fmt("%g", c.eps) << "  t " << fmt("%g", c.t) << "  target variance " << fmt("%.6g", c.target_var)
      << "\n";
  out << "  (E F)^2/s^4          " << fmt("%.4e", c.term_mean) << "\n";
  out << "  A (Var-s^2)^2        " << fmt("%.4e", c.term_var) << "\n";
  out << "  C sqrt(E|DTheta|^4)  " << fmt("%.4e", c.term_dtheta) << "\n";
  out << "  bound (c = 1)        " << fmt("%.4e", c.bound) << "\n";
  out << "  fisher               " << fmt("%.4e", c.fisher) << " +- " << fmt("%.2e", c.fisher_se) << "\n";
  if (c.envelope_flag) out << "  FLAG: fisher exceeds 50 x bound\n";
  return 0;
}

int do_lower(const PlanFlags& f, const std::string& compare, std::ostream& out) {
  SweepPlan plan = f.resolve();
  plan.validate();
  const Problem p = resolve_problem(plan);
  std::optional<SweepResult> sw;
  if (!compare.empty()) {
    const PersistedRun run = read_run(compare);
    SweepResult s;
    for (const auto& r : run.reports) {
      SweepPoint pt;
      pt.eps = r.report.eps;
      pt.ok = r.ok;
      pt.report = r.report;
      s.points.push_back(pt);
    }
    sw = std::move(s);
  }
  const LowerBoundResult lr = lower_bound_experiment(p, plan.t, plan.paths, plan.mesh, plan.seed, sw ? &*sw : nullptr);
  const fs::path dir = make_run_directory(label_of(p) + "-lower", f.out);
  write_lower_bound(dir, lr);
  write_meta(dir, "lower", p.label, plan);
  out << "run directory: " << dir.string() << "\n";
  out << "beta^2 " << fmt("%.6g", lr.beta2) << "  E|E[delta|U]| " << fmt("%.4e", lr.mean_abs_conditional) << "\n";
  out << "lower bound " << fmt("%.4e", lr.lower) << " +- " << fmt("%.2e", lr.lower_se) << "\n";
  for (const auto& c : lr.comparison)
    out << "  eps " << std::setw(7) << fmt("%g", c.eps) << "  fisher/eps^2 " << fmt("%.4e", c.ratio) << " +- "
        << fmt("%.2e", c.ratio_se) << "  " << (c.consistent ? "consistent" : "BELOW") << "\n";
  return 0;
}

int do_volterra(const PlanFlags& f, std::ostream& out) {
  SweepPlan plan = f.resolve();
  if (!f.o_eps->count()) plan.eps = {0.1};
  plan.validate();
  const Problem p = resolve_problem(plan);
  const std::vector<double> ts{plan.t / 4.0, plan.t / 2.0, plan.t};
  const VolterraTable tab = volterra_negative_moment_check(p, plan.eps.front(), plan.p0, ts, plan.paths, plan.mesh,
                                                           plan.seed);
  const fs::path dir = make_run_directory(label_of(p) + "-volterra", f.out);
  write_volterra(dir, tab, plan.p0);
  write_meta(dir, "volterra", p.label, plan);
  out << "run directory: " << dir.string() << "\n";
  for (const auto& r : tab.rows)
    out << (r.kernel == VolterraKernel::constant ? "k=1       " : "k=(t-r)^2 ") << " t " << std::setw(6)
        << fmt("%g", r.t) << "  E[.^-p0] " << fmt("%.5e", r.moment.estimate) << " +- "
        << fmt("%.2e", r.moment.std_error) << "\n";
  out << "slope k=1: " << fmt("%.3f", tab.slope_constant) << " (expected " << fmt("%g", tab.expected_constant)
      << ")\n";
  out << "slope k=(t-r)^2: " << fmt("%.3f", tab.slope_quadratic) << " (expected "
      << fmt("%g", tab.expected_quadratic) << ")\n";
  return 0;
}

}  // namespace

std::string render_report(const fs::path& dir) {
  const PersistedRun run = read_run(dir);
  std::ostringstream os;
  os << std::left << std::setw(9) << "eps" << std::setw(26) << "fisher" << std::setw(26) << "kolmogorov"
     << "pinsker\n";
  for (const auto& r : run.reports) {
    os << std::setw(9) << fmt("%g", r.report.eps);
    if (!r.ok) {
      os << "failed: " << r.error << "\n";
      continue;
    }
    std::string fcol;
    if (r.report.fisher < r.report.fisher_se)
      fcol = "≤ stderr (" + fmt("%.2e", r.report.fisher_se) + ")";
    else
      fcol = fmt("%.3e", r.report.fisher) + " ± " + fmt("%.1e", r.report.fisher_se);
    const std::string kcol = fmt("%.3e", r.report.kolmogorov) + " ± " + fmt("%.1e", r.report.kolmogorov_band);
    const PinskerVerdict v = pinsker_check(r.report);
    // setw counts bytes; pad by display width instead
    auto pad = [](const std::string& s, std::size_t w) {
      std::size_t cols = 0;
      for (unsigned char c : s)
        if ((c & 0xC0) != 0x80) ++cols;
      return s + std::string(cols < w ? w - cols : 1, ' ');
    };
    os << pad(fcol, 26) << pad(kcol, 26) << (v.pass ? "ok" : "VIOLATED");
    if (r.report.warning) os << "  (outside knots " << fmt("%.1f%%", 100.0 * r.report.outside_fraction) << ")";
    os << "\n";
  }
  os << "\n";
  for (const char* q : {"fisher", "kolmogorov"}) {
    const PersistedFit* f = run.fit(q);
    if (!f) continue;
    os << q << " slope: ";
    if (f->ok)
      os << fmt("%.3f", f->slope) << " ± " << fmt("%.3f", f->slope_se) << "  (R² " << fmt("%.3f", f->r2) << ", "
         << f->used << " used, " << f->excluded << " below noise floor)\n";
    else
      os << f->message << "\n";
  }
  return os.str();
}

std::string render_plot(const fs::path& dir, const std::string& what) {
  const PersistedRun run = read_run(dir);
  const PersistedFit* fit = run.fit(what);
  if (!fit) throw InvalidArgument("plot: no fitted quantity '" + what + "' in " + dir.string());
  struct Pt {
    double eps, value, se;
  };
  std::vector<Pt> pts;
  if (what == "fisher" || what == "kolmogorov") {
    for (const auto& r : run.reports) {
      if (!r.ok) continue;
      if (what == "fisher")
        pts.push_back({r.report.eps, r.report.fisher, r.report.fisher_se});
      else
        pts.push_back(
            {r.report.eps, r.report.kolmogorov, kKolmogorovNullSd / std::sqrt(static_cast<double>(r.report.n))});
    }
  } else {
    for (const auto& c : run.components) {
      if (what == "mean_sq") pts.push_back({c.eps, c.mean_sq, c.mean_sq_se});
      else if (what == "var_gap_sq") pts.push_back({c.eps, c.var_gap_sq, c.var_gap_sq_se});
      else if (what == "dtheta4_root") pts.push_back({c.eps, c.dtheta4_root, c.dtheta4_root_se});
      else if (what == "abs_mean") pts.push_back({c.eps, std::abs(c.mean), c.mean_se});
      else if (what == "abs_var_gap") pts.push_back({c.eps, std::abs(c.var - c.target_var), c.var_se});
    }
  }
  std::vector<Pt> shown;
  for (const auto& p : pts)
    if (p.value > 0.0) shown.push_back(p);
  if (shown.empty()) throw Error("plot: no positive values to show for '" + what + "'");

  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& p : shown) {
    x0 = std::min(x0, std::log10(p.eps));
    x1 = std::max(x1, std::log10(p.eps));
    y0 = std::min(y0, std::log10(p.value));
    y1 = std::max(y1, std::log10(p.value));
  }
  if (fit->ok) {
    for (double lx : {x0, x1}) {
      const double ly = (fit->intercept + fit->slope * lx * std::log(10.0)) / std::log(10.0);
      y0 = std::min(y0, ly);
      y1 = std::max(y1, ly);
    }
  }
  if (x1 - x0 < 1e-9) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-9) y0 -= 0.5, y1 += 0.5;
  const double W = 640, H = 480, L = 70, R = 20, T = 40, B = 50;
  auto sx = [&](double lx) { return L + (lx - x0) / (x1 - x0) * (W - L - R); };
  auto sy = [&](double ly) { return H - B - (ly - y0) / (y1 - y0) * (H - T - B); };
  auto g = [](double v) { return fmt("%.17g", v); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" viewBox=\"0 0 640 480\""
     << " data-quantity=\"" << what << "\"";
  if (fit->ok) os << " data-slope=\"" << g(fit->slope) << "\" data-intercept=\"" << g(fit->intercept) << "\"";
  os << ">\n";
  os << "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (W / 2) << "\" y=\"" << (H - 12) << "\" text-anchor=\"middle\" font-size=\"13\">log10 eps</text>\n";
  os << "<text x=\"16\" y=\"" << (H / 2) << "\" font-size=\"13\" transform=\"rotate(-90 16 " << (H / 2)
     << ")\" text-anchor=\"middle\">log10 " << what << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double lx = x0 + (x1 - x0) * k / 4.0, ly = y0 + (y1 - y0) * k / 4.0;
    os << "<text x=\"" << fmt("%.1f", sx(lx)) << "\" y=\"" << (H - B + 16) << "\" font-size=\"11\" text-anchor=\"middle\">"
       << fmt("%.2f", lx) << "</text>\n";
    os << "<text x=\"" << (L - 6) << "\" y=\"" << fmt("%.1f", sy(ly) + 4) << "\" font-size=\"11\" text-anchor=\"end\">"
       << fmt("%.2f", ly) << "</text>\n";
  }
  for (const auto& p : shown) {
    const bool used = p.value >= kNoiseFloor * p.se;
    os << "<circle cx=\"" << fmt("%.2f", sx(std::log10(p.eps))) << "\" cy=\"" << fmt("%.2f", sy(std::log10(p.value)))
       << "\" r=\"4\" fill=\"" << (used ? "#1f5fa8" : "none") << "\" stroke=\"#1f5fa8\" data-eps=\"" << g(p.eps)
       << "\" data-value=\"" << g(p.value) << "\" data-used=\"" << (used ? 1 : 0) << "\"/>\n";
  }
  std::string caption;
  if (fit->ok) {
    const double ya = (fit->intercept + fit->slope * x0 * std::log(10.0)) / std::log(10.0);
    const double yb = (fit->intercept + fit->slope * x1 * std::log(10.0)) / std::log(10.0);
    os << "<line x1=\"" << fmt("%.2f", sx(x0)) << "\" y1=\"" << fmt("%.2f", sy(ya)) << "\" x2=\"" << fmt("%.2f", sx(x1))
       << "\" y2=\"" << fmt("%.2f", sy(yb)) << "\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>\n";
    caption = "slope " + fmt("%.3f", fit->slope) + " ± " + fmt("%.3f", fit->slope_se);
  } else {
    caption = fit->message;
  }
  os << "<text x=\"" << (L + 10) << "\" y=\"" << (T - 12) << "\" font-size=\"14\">" << what << ": " << caption
     << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"small-noise Fisher distance laboratory"};
  app.require_subcommand(1, 1);

  int density = 16;
  std::string vproblem, vconfig;
  auto* validate_cmd = app.add_subcommand("validate", "screen a problem against the standing assumptions");
  validate_cmd->add_option("--problem", vproblem, "builtin problem name");
  validate_cmd->add_option("--config", vconfig, "problem configuration file");
  validate_cmd->add_option("--density", density, "samples per unit box length (>= 8)");

  PlanFlags sweep_f, bound_f, lower_f, add_f, volt_f;
  std::string compare;
  sweep_f.attach(app.add_subcommand("sweep", "Fisher and Kolmogorov distances over an eps grid"));
  bound_f.attach(app.add_subcommand("bound", "bound components at a single eps"));
  auto* lower_cmd = app.add_subcommand("lower", "lower-bound functional from the limit pair");
  lower_f.attach(lower_cmd);
  lower_cmd->add_option("--compare", compare, "sweep run directory to compare fisher/eps^2 against");
  add_f.attach(app.add_subcommand("additive", "sweep of the additive functional"));
  volt_f.attach(app.add_subcommand("volterra", "negative moments at t/4, t/2, t"));

  std::string report_dir, plot_dir, what = "fisher", plot_out;
  auto* report_cmd = app.add_subcommand("report", "render a sweep directory");
  report_cmd->add_option("run_dir", report_dir)->required();
  auto* plot_cmd = app.add_subcommand("plot", "log-log SVG of a fitted quantity");
  plot_cmd->add_option("run_dir", plot_dir)->required();
  plot_cmd->add_option("--what", what, "fisher, kolmogorov, mean_sq, var_gap_sq, dtheta4_root, abs_mean, abs_var_gap");
  plot_cmd->add_option("--out", plot_out, "output file (default <run_dir>/plot-<what>.svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*validate_cmd) {
      const Problem p = vconfig.empty() ? builtin(vproblem.empty() ? "P2" : vproblem) : load_problem_file(vconfig);
      const ValidationReport r = validate(p, density);
      out << to_text(r);
      return r.passed() ? 0 : 2;
    }
    if (app.got_subcommand("sweep")) return do_sweep(sweep_f, Functional::terminal_state, "sweep", out);
    if (app.got_subcommand("additive")) return do_sweep(add_f, Functional::additive, "additive", out);
    if (app.got_subcommand("bound")) return do_bound(bound_f, out);
    if (*lower_cmd) return do_lower(lower_f, compare, out);
    if (app.got_subcommand("volterra")) return do_volterra(volt_f, out);
    if (*report_cmd) {
      out << render_report(report_dir);
      return 0;
    }
    if (*plot_cmd) {
      const std::string svg = render_plot(plot_dir, what);
      const fs::path target = plot_out.empty() ? fs::path(plot_dir) / ("plot-" + what + ".svg") : fs::path(plot_out);
      std::ofstream os(target, std::ios::binary);
      if (!os) throw Error("cannot write " + target.string());
      os << svg;
      out << target.string() << "\n";
      return 0;
    }
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace snfl::cli
