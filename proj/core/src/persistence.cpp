#include "snfl/persistence.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "snfl/error.hpp"

namespace snfl {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// free text goes into CSV cells unquoted, so commas and newlines are folded
std::string cell(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os << content;
  if (!os) throw Error("write failed: " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("missing file: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// rows of a `#schema=` CSV as name->value maps
std::vector<std::vector<std::string>> read_csv(const fs::path& path, std::string_view schema,
                                               std::vector<std::string>& header) {
  std::istringstream is(read_file(path));
  std::string line;
  if (!std::getline(is, line) || line != "#schema=" + std::string(schema))
    throw Error("unexpected schema line in " + path.string());
  if (!std::getline(is, line)) throw Error("missing header in " + path.string());
  header = split(line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto r = split(line);
    if (r.size() != header.size()) throw Error("malformed row in " + path.string());
    rows.push_back(std::move(r));
  }
  return rows;
}

std::size_t column(const std::vector<std::string>& header, std::string_view name, const fs::path& path) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw Error("column '" + std::string(name) + "' missing in " + path.string());
}

double to_d(const std::string& s) { return s.empty() ? 0.0 : std::stod(s); }

}  // namespace

fs::path make_run_directory(const std::string& label, const std::string& out, const fs::path& root) {
  fs::path dir;
  if (!out.empty()) {
    dir = out;
  } else {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
    const fs::path base = root / (std::string(stamp) + "-" + label);
    dir = base;
    for (int k = 2; fs::exists(dir); ++k) dir = base.string() + "-" + std::to_string(k);
  }
  fs::create_directories(dir);
  return dir;
}

void write_meta(const fs::path& dir, std::string_view verb, const std::string& label, const SweepPlan& plan) {
  json j;
  j["version"] = kVersion;
  j["verb"] = std::string(verb);
  j["label"] = label;
  j["seed"] = plan.seed;
  j["mesh"] = plan.mesh;
  j["plan"] = json::parse(to_json(plan));
  write_file(dir / "meta.json", j.dump(2) + "\n");
}

void write_reports_csv(std::span<const SweepPoint> points, std::ostream& os) {
  os << "#schema=distance_report/1\n";
  os << "eps,t,n,mu,var,fisher,fisher_se,kolmogorov,kolmogorov_band,method,bandwidth,outside_fraction,warning,ok,"
        "error\n";
  for (const auto& pt : points) {
    const auto& r = pt.report;
    os << num(pt.eps) << ',' << num(r.t) << ',' << r.n << ',' << num(r.mu) << ',' << num(r.var) << ','
       << num(r.fisher) << ',' << num(r.fisher_se) << ',' << num(r.kolmogorov) << ',' << num(r.kolmogorov_band)
       << ',' << r.method << ',' << num(r.bandwidth) << ',' << num(r.outside_fraction) << ',' << (r.warning ? 1 : 0)
       << ',' << (pt.ok ? 1 : 0) << ',' << cell(pt.error) << '\n';
  }
}

void write_ratefits_csv(std::span<const NamedFit> fits, std::ostream& os) {
  os << "#schema=rate_fit/1\n";
  os << "quantity,status,slope,slope_se,intercept,r2,used,excluded,noise_floor,message\n";
  for (const auto& f : fits) {
    os << f.quantity << ',';
    if (f.fit) {
      const auto& r = *f.fit;
      os << "ok," << num(r.slope) << ',' << num(r.slope_se) << ',' << num(r.intercept) << ',' << num(r.r2) << ','
         << r.used.size() << ',' << r.excluded.size() << ',' << num(kNoiseFloor) << ",\n";
    } else {
      os << "failed,,,,,0,0," << num(kNoiseFloor) << ',' << cell(f.error) << '\n';
    }
  }
}

void write_components_csv(std::span<const SweepPoint> points, std::ostream& os) {
  os << "#schema=bound_components/1\n";
  os << "eps,t,target_var,mean,mean_se,mean_sq,mean_sq_se,var,var_se,var_gap_sq,var_gap_sq_se,theta_mean,"
        "theta_mean_se,sample_var,sample_var_se,dtheta4_root,dtheta4_root_se,theta_neg8,theta_neg16,u8,A,C,"
        "term_mean,term_var,term_dtheta,bound,fisher,fisher_se,envelope_flag\n";
  for (const auto& pt : points) {
    if (!pt.ok) continue;
    const auto& c = pt.components;
    const double v[] = {c.eps,           c.t,           c.target_var,   c.mean,         c.mean_se,
                        c.mean_sq,       c.mean_sq_se,  c.var,          c.var_se,       c.var_gap_sq,
                        c.var_gap_sq_se, c.theta_mean,  c.theta_mean_se, c.sample_var,  c.sample_var_se,
                        c.dtheta4_root,  c.dtheta4_root_se, c.theta_neg8, c.theta_neg16, c.u8,
                        c.A,             c.C,           c.term_mean,    c.term_var,     c.term_dtheta,
                        c.bound,         c.fisher,      c.fisher_se};
    for (double x : v) os << num(x) << ',';
    os << (c.envelope_flag ? 1 : 0) << '\n';
  }
}

void write_sweep(const fs::path& dir, const SweepResult& r, std::string_view verb) {
  fs::create_directories(dir);
  write_file(dir / "plan.json", to_json(r.plan) + "\n");
  std::ostringstream rep, fits, comp;
  write_reports_csv(r.points, rep);
  write_ratefits_csv(r.fits, fits);
  write_components_csv(r.points, comp);
  write_file(dir / "reports.csv", rep.str());
  write_file(dir / "ratefits.csv", fits.str());
  write_file(dir / "bound_components.csv", comp.str());
  write_meta(dir, verb, r.label, r.plan);
}

void write_lower_bound(const fs::path& dir, const LowerBoundResult& r) {
  std::ostringstream os;
  os << "#schema=lower_bound/1\n";
  os << "t,paths,beta2,mean_abs_conditional,lower,lower_se,mean_delta,mean_delta_se\n";
  os << num(r.t) << ',' << r.paths << ',' << num(r.beta2) << ',' << num(r.mean_abs_conditional) << ','
     << num(r.lower) << ',' << num(r.lower_se) << ',' << num(r.mean_delta) << ',' << num(r.mean_delta_se) << '\n';
  write_file(dir / "lower_bound.csv", os.str());
  if (!r.comparison.empty()) {
    std::ostringstream cs;
    cs << "#schema=lower_comparison/1\n";
    cs << "eps,ratio,ratio_se,lower,lower_se,consistent\n";
    for (const auto& c : r.comparison)
      cs << num(c.eps) << ',' << num(c.ratio) << ',' << num(c.ratio_se) << ',' << num(r.lower) << ','
         << num(r.lower_se) << ',' << (c.consistent ? 1 : 0) << '\n';
    write_file(dir / "lower_comparison.csv", cs.str());
  }
}

void write_volterra(const fs::path& dir, const VolterraTable& table, double p0) {
  std::ostringstream os;
  os << "#schema=volterra/1\n";
  os << "kernel,t,p0,estimate,std_error,top5_share,trimmed_estimate\n";
  for (const auto& row : table.rows)
    os << (row.kernel == VolterraKernel::constant ? "constant" : "quadratic") << ',' << num(row.t) << ','
       << num(p0) << ',' << num(row.moment.estimate) << ',' << num(row.moment.std_error) << ','
       << num(row.moment.tail.top5_share) << ',' << num(row.moment.tail.trimmed_estimate) << '\n';
  write_file(dir / "volterra.csv", os.str());
  std::ostringstream fs_;
  fs_ << "#schema=volterra_slope/1\n";
  fs_ << "kernel,slope,expected\n";
  fs_ << "constant," << num(table.slope_constant) << ',' << num(table.expected_constant) << '\n';
  fs_ << "quadratic," << num(table.slope_quadratic) << ',' << num(table.expected_quadratic) << '\n';
  write_file(dir / "volterra_slopes.csv", fs_.str());
}

const PersistedFit* PersistedRun::fit(std::string_view q) const {
  for (const auto& f : fits)
    if (f.quantity == q) return &f;
  return nullptr;
}

PersistedRun read_run(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("not a run directory: " + dir.string());
  PersistedRun run;
  run.plan = plan_from_json(read_file(dir / "plan.json"));
  try {
    std::vector<std::string> h;
    const fs::path rp = dir / "reports.csv";
    for (const auto& row : read_csv(rp, "distance_report/1", h)) {
      PersistedReport pr;
      auto at = [&](std::string_view name) -> const std::string& { return row[column(h, name, rp)]; };
      pr.report.eps = to_d(at("eps"));
      pr.report.t = to_d(at("t"));
      pr.report.n = static_cast<std::size_t>(std::stoull(at("n")));
      pr.report.mu = to_d(at("mu"));
      pr.report.var = to_d(at("var"));
      pr.report.fisher = to_d(at("fisher"));
      pr.report.fisher_se = to_d(at("fisher_se"));
      pr.report.kolmogorov = to_d(at("kolmogorov"));
      pr.report.kolmogorov_band = to_d(at("kolmogorov_band"));
      pr.report.method = at("method");
      pr.report.bandwidth = to_d(at("bandwidth"));
      pr.report.outside_fraction = to_d(at("outside_fraction"));
      pr.report.warning = at("warning") == "1";
      pr.ok = at("ok") == "1";
      pr.error = at("error");
      run.reports.push_back(std::move(pr));
    }
    const fs::path fp = dir / "ratefits.csv";
    for (const auto& row : read_csv(fp, "rate_fit/1", h)) {
      PersistedFit f;
      auto at = [&](std::string_view name) -> const std::string& { return row[column(h, name, fp)]; };
      f.quantity = at("quantity");
      f.ok = at("status") == "ok";
      f.slope = to_d(at("slope"));
      f.slope_se = to_d(at("slope_se"));
      f.intercept = to_d(at("intercept"));
      f.r2 = to_d(at("r2"));
      f.used = static_cast<std::size_t>(std::stoull(at("used")));
      f.excluded = static_cast<std::size_t>(std::stoull(at("excluded")));
      f.message = at("message");
      run.fits.push_back(std::move(f));
    }
    const fs::path cp = dir / "bound_components.csv";
    for (const auto& row : read_csv(cp, "bound_components/1", h)) {
      BoundComponents c;
      auto at = [&](std::string_view name) { return to_d(row[column(h, name, cp)]); };
      c.eps = at("eps");
      c.t = at("t");
      c.target_var = at("target_var");
      c.mean = at("mean");
      c.mean_se = at("mean_se");
      c.mean_sq = at("mean_sq");
      c.mean_sq_se = at("mean_sq_se");
      c.var = at("var");
      c.var_se = at("var_se");
      c.var_gap_sq = at("var_gap_sq");
      c.var_gap_sq_se = at("var_gap_sq_se");
      c.theta_mean = at("theta_mean");
      c.theta_mean_se = at("theta_mean_se");
      c.sample_var = at("sample_var");
      c.sample_var_se = at("sample_var_se");
      c.dtheta4_root = at("dtheta4_root");
      c.dtheta4_root_se = at("dtheta4_root_se");
      c.theta_neg8 = at("theta_neg8");
      c.theta_neg16 = at("theta_neg16");
      c.u8 = at("u8");
      c.A = at("A");
      c.C = at("C");
      c.term_mean = at("term_mean");
      c.term_var = at("term_var");
      c.term_dtheta = at("term_dtheta");
      c.bound = at("bound");
      c.fisher = at("fisher");
      c.fisher_se = at("fisher_se");
      c.envelope_flag = at("envelope_flag") != 0.0;
      run.components.push_back(c);
    }
  } catch (const std::invalid_argument&) {
    throw Error("malformed number in run directory " + dir.string());
  } catch (const std::out_of_range&) {
    throw Error("number out of range in run directory " + dir.string());
  }
  return run;
}

}  // namespace snfl
