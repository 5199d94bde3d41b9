#include "snfl/problem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "snfl/error.hpp"

namespace snfl {

using json = nlohmann::json;

Coefficient::Coefficient() : expr_(Expression::compile("0")) {}

Coefficient::Coefficient(std::string text, Native fn) : expr_(Expression::compile(text)), fn_(fn) {
  zero_ = expr_.is_constant() && expr_(0.0, 0.0) == 0.0;
}

Coefficient Coefficient::parse(std::string_view text) {
  Coefficient c;
  c.expr_ = Expression::compile(text);
  c.fn_ = nullptr;
  c.zero_ = c.expr_.is_constant() && c.expr_(0.0, 0.0) == 0.0;
  return c;
}

namespace {

double zero(double, double) { return 0.0; }
double one(double, double) { return 1.0; }
double neg_one(double, double) { return -1.0; }
double neg_x(double, double x) { return -x; }
double sin_x(double, double x) { return std::sin(x); }
double cos_x(double, double x) { return std::cos(x); }
double neg_sin_x(double, double x) { return -std::sin(x); }
double f_obs(double, double x) { return 2.0 * x + std::sin(x); }
double f_obs1(double, double x) { return 2.0 + std::cos(x); }
double p3_sigma(double, double x) { return 1.0 + 0.2 * std::cos(x); }
double p3_sigma1(double, double x) { return -0.2 * std::sin(x); }
double p3_sigma2(double, double x) { return -0.2 * std::cos(x); }

void attach_default_observable(Problem& p) {
  p.has_f = true;
  p.f = Coefficient("2*x+sin(x)", f_obs);
  p.f1 = Coefficient("2+cos(x)", f_obs1);
  p.f2 = Coefficient("-sin(x)", neg_sin_x);
}

Problem base(std::string label, double x0) {
  Problem p;
  p.label = std::move(label);
  p.x0 = x0;
  p.horizon = 1.0;
  p.b = p.b1 = p.b2 = Coefficient("0", zero);
  p.sigma = Coefficient("1", one);
  p.sigma1 = p.sigma2 = Coefficient("0", zero);
  return p;
}

const std::vector<std::string>& names() {
  static const std::vector<std::string> n{"P0_pure_noise", "P1_ou", "P2_sine_drift", "P3_cos_diffusion"};
  return n;
}

}  // namespace

std::vector<std::string> builtin_names() { return names(); }

Problem builtin(std::string_view name) {
  std::string full;
  for (const auto& n : names()) {
    if (name == n || (name.size() >= 2 && n.compare(0, name.size(), name) == 0 && n[name.size()] == '_')) full = n;
  }
  if (full == "P0_pure_noise") {
    Problem p = base(full, 0.0);
    p.oracle = {true, true, false, true};
    return p;
  }
  if (full == "P1_ou") {
    Problem p = base(full, 1.0);
    p.b = Coefficient("-x", neg_x);
    p.b1 = Coefficient("-1", neg_one);
    attach_default_observable(p);
    p.oracle = {true, true, false, true};
    return p;
  }
  if (full == "P2_sine_drift") {
    Problem p = base(full, 0.5);
    p.b = Coefficient("sin(x)", sin_x);
    p.b1 = Coefficient("cos(x)", cos_x);
    p.b2 = Coefficient("-sin(x)", neg_sin_x);
    attach_default_observable(p);
    return p;
  }
  if (full == "P3_cos_diffusion") {
    Problem p = base(full, 1.0);
    p.b = Coefficient("-x", neg_x);
    p.b1 = Coefficient("-1", neg_one);
    p.sigma = Coefficient("1+0.2*cos(x)", p3_sigma);
    p.sigma1 = Coefficient("-0.2*sin(x)", p3_sigma1);
    p.sigma2 = Coefficient("-0.2*cos(x)", p3_sigma2);
    return p;
  }
  std::string msg = "unknown problem '" + std::string(name) + "'; valid builtins:";
  for (const auto& n : names()) msg += " " + n;
  throw InvalidArgument(msg);
}

Problem with_observable(Problem p, std::string_view f, std::string_view f1, std::string_view f2) {
  p.has_f = true;
  p.f = Coefficient::parse(f);
  p.f1 = Coefficient::parse(f1);
  p.f2 = Coefficient::parse(f2);
  return p;
}

namespace {

std::string field_text(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) throw InvalidArgument(std::string("missing required field '") + key + "'");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number()) {
    std::ostringstream os;
    os.precision(17);
    os << it->get<double>();
    return os.str();
  }
  throw InvalidArgument(std::string("field '") + key + "' must be an expression string");
}

double field_number(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) throw InvalidArgument(std::string("missing required field '") + key + "'");
  if (!it->is_number()) throw InvalidArgument(std::string("field '") + key + "' must be a number");
  return it->get<double>();
}

Coefficient parse_field(const json& doc, const char* key) {
  const std::string text = field_text(doc, key);
  try {
    return Coefficient::parse(text);
  } catch (const ParseError& e) {
    throw ParseError(std::string("field '") + key + "': " + e.what(), e.position());
  }
}

void probe(const Coefficient& c, const char* key, double x0, double T) {
  const double xs[] = {x0, x0 - 1.0, x0 + 1.0};
  const double ts[] = {0.0, 0.5 * T, T};
  for (double t : ts)
    for (double x : xs)
      if (!std::isfinite(c(t, x)))
        throw InvalidArgument(std::string("field '") + key + "' is non-finite at probe (t=" + std::to_string(t) +
                              ", x=" + std::to_string(x) + ")");
}

}  // namespace

Problem load_problem(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("configuration is not valid JSON: ") + e.what(), e.byte);
  }
  if (!doc.is_object()) throw InvalidArgument("configuration must be a JSON object");
  Problem p;
  p.label = doc.value("label", std::string("custom"));
  p.b = parse_field(doc, "b");
  p.b1 = parse_field(doc, "b1");
  p.b2 = parse_field(doc, "b2");
  p.sigma = parse_field(doc, "sigma");
  p.sigma1 = parse_field(doc, "sigma1");
  p.sigma2 = parse_field(doc, "sigma2");
  p.x0 = field_number(doc, "x0");
  p.horizon = field_number(doc, "horizon");
  if (!(p.horizon > 0.0) || !std::isfinite(p.horizon)) throw InvalidArgument("horizon must be positive");
  if (!std::isfinite(p.x0)) throw InvalidArgument("x0 must be finite");
  if (doc.contains("f") && !doc["f"].is_null()) {
    p.has_f = true;
    p.f = parse_field(doc, "f");
    p.f1 = parse_field(doc, "f1");
    p.f2 = parse_field(doc, "f2");
  }
  probe(p.b, "b", p.x0, p.horizon);
  probe(p.b1, "b1", p.x0, p.horizon);
  probe(p.b2, "b2", p.x0, p.horizon);
  probe(p.sigma, "sigma", p.x0, p.horizon);
  probe(p.sigma1, "sigma1", p.x0, p.horizon);
  probe(p.sigma2, "sigma2", p.x0, p.horizon);
  if (p.has_f) {
    probe(p.f, "f", p.x0, p.horizon);
    probe(p.f1, "f1", p.x0, p.horizon);
    probe(p.f2, "f2", p.x0, p.horizon);
  }
  return p;
}

Problem load_problem_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read configuration " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Problem p = load_problem(ss.str());
  return p;
}

std::string serialize(const Problem& p) {
  json doc;
  doc["label"] = p.label;
  doc["b"] = p.b.text();
  doc["b1"] = p.b1.text();
  doc["b2"] = p.b2.text();
  doc["sigma"] = p.sigma.text();
  doc["sigma1"] = p.sigma1.text();
  doc["sigma2"] = p.sigma2.text();
  if (p.has_f) {
    doc["f"] = p.f.text();
    doc["f1"] = p.f1.text();
    doc["f2"] = p.f2.text();
  }
  doc["x0"] = p.x0;
  doc["horizon"] = p.horizon;
  return doc.dump(2);
}

// ---------------------------------------------------------------------------
// validation

bool ValidationReport::passed() const noexcept {
  return std::all_of(checks.begin(), checks.end(), [](const AssumptionCheck& c) { return c.passed; });
}

namespace {

struct BoxMax {
  double value = -std::numeric_limits<double>::infinity();
  GridSample at;
};

template <class Fn>
BoxMax box_max(const Problem& p, int density, double half_width, Fn&& fn) {
  BoxMax m;
  for (int i = 0; i < density; ++i) {
    const double t = p.horizon * i / (density - 1);
    for (int j = 0; j < density; ++j) {
      const double x = p.x0 - half_width + 2.0 * half_width * j / (density - 1);
      const double v = fn(t, x);
      if (!(v <= m.value)) {  // NaN propagates as a maximum
        m.value = v;
        m.at = {t, x, v};
      }
    }
  }
  return m;
}

// A maximum that grows by more than this factor when the box doubles is
// treated as unbounded.
constexpr double kGrowthFactor = 1.5;

}  // namespace

ValidationReport validate(const Problem& p, int density) {
  if (density < 8) throw InvalidArgument("validate: grid density must be >= 8");
  ValidationReport r;
  const double w = 5.0 * (1.0 + std::abs(p.x0));
  std::ostringstream g;
  g << density << "x" << density << " on [0," << p.horizon << "]x[" << p.x0 - w << "," << p.x0 + w
    << "], doubled box for growth";
  r.grid = g.str();

  auto absf = [](const Coefficient& c) { return [&c](double t, double x) { return std::abs(c(t, x)); }; };

  // finiteness on the doubled box
  {
    AssumptionCheck c{"finite", true, 0.0, std::nullopt, "all coefficients finite on |x-X0| <= 10(1+|X0|)"};
    const Coefficient* all[] = {&p.b, &p.b1, &p.b2, &p.sigma, &p.sigma1, &p.sigma2, &p.f, &p.f1, &p.f2};
    const int count = p.has_f ? 9 : 6;
    for (int k = 0; k < count && c.passed; ++k) {
      const BoxMax m = box_max(p, density, 2.0 * w, absf(*all[k]));
      if (!std::isfinite(m.value)) {
        c.passed = false;
        c.worst = m.value;
        c.witness = m.at;
        c.detail = "non-finite value of " + all[k]->text();
      }
    }
    r.checks.push_back(c);
  }

  // A1: linear growth
  {
    auto ratio = [&p](double t, double x) { return (std::abs(p.b(t, x)) + std::abs(p.sigma(t, x))) / (1.0 + std::abs(x)); };
    const BoxMax inner = box_max(p, density, w, ratio);
    const BoxMax outer = box_max(p, density, 2.0 * w, ratio);
    r.growth_ratio = inner.value;
    AssumptionCheck c{"A1 linear growth", true, inner.value, std::nullopt, "max (|b|+|sigma|)/(1+|x|)"};
    if (!(outer.value <= kGrowthFactor * inner.value + 1e-12)) {
      c.passed = false;
      c.worst = outer.value;
      c.witness = outer.at;
      c.detail = "growth ratio keeps increasing on the doubled box";
    }
    r.checks.push_back(c);
  }

  // A2: bounded first/second derivatives
  {
    AssumptionCheck c{"A2 bounded derivatives", true, 0.0, std::nullopt, "max |b'|,|b''|,|sigma'|,|sigma''|"};
    struct Item {
      const Coefficient* coef;
      double* slot;
      const char* name;
    } items[] = {{&p.b1, &r.max_b1, "b'"}, {&p.b2, &r.max_b2, "b''"}, {&p.sigma1, &r.max_sigma1, "sigma'"},
                 {&p.sigma2, &r.max_sigma2, "sigma''"}};
    for (auto& it : items) {
      const BoxMax inner = box_max(p, density, w, absf(*it.coef));
      const BoxMax outer = box_max(p, density, 2.0 * w, absf(*it.coef));
      *it.slot = inner.value;
      if (c.passed && !(outer.value <= kGrowthFactor * inner.value + 1e-12)) {
        c.passed = false;
        c.witness = outer.at;
        c.worst = outer.value;
        c.detail = std::string(it.name) + " unbounded on sampled grid";
      }
    }
    r.L_estimate = std::max({r.max_b1, r.max_b2, r.max_sigma1, r.max_sigma2});
    if (c.passed) c.worst = r.L_estimate;
    r.checks.push_back(c);
  }

  // A3: f' bounded below by a positive constant
  if (p.has_f) {
    const BoxMax m = box_max(p, density, w, [&p](double t, double x) { return -p.f1(t, x); });
    const double fmin = -m.value;
    r.f1_min = fmin;
    AssumptionCheck c{"A3 observable monotone", fmin > 0.0, fmin, std::nullopt, "min f'"};
    if (!c.passed) c.witness = GridSample{m.at.t, m.at.x, fmin};
    r.checks.push_back(c);
  }
  return r;
}

std::string to_text(const ValidationReport& r) {
  std::ostringstream os;
  os << "grid: " << r.grid << "\n";
  for (const auto& c : r.checks) {
    os << (c.passed ? "PASS " : "FAIL ") << c.name << "  worst=" << c.worst << "  (" << c.detail << ")";
    if (c.witness) os << "  witness t=" << c.witness->t << " x=" << c.witness->x << " value=" << c.witness->value;
    os << "\n";
  }
  os << "L estimate: " << r.L_estimate << "\n";
  os << "growth ratio: " << r.growth_ratio << "\n";
  if (r.f1_min) os << "min f': " << *r.f1_min << "\n";
  return os.str();
}

}  // namespace snfl
