#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "snfl/expression.hpp"

namespace snfl {

/// A scalar coefficient c(t, x). Built-in problems carry a native function
/// pointer for speed; every coefficient also carries its expression text so
/// it can be serialized and reloaded.
class Coefficient {
public:
  using Native = double (*)(double, double);

  Coefficient();
  Coefficient(std::string text, Native fn);
  static Coefficient parse(std::string_view text);

  double operator()(double t, double x) const noexcept { return fn_ ? fn_(t, x) : expr_(t, x); }

  const std::string& text() const noexcept { return expr_.text(); }
  /// Constant zero program (e.g. "0"); drives reduced code paths.
  bool is_zero() const noexcept { return zero_; }

private:
  Expression expr_;
  Native fn_ = nullptr;
  bool zero_ = true;
};

/// Which closed forms are known for a problem.
struct OracleFlags {
  bool skeleton = false;
  bool beta = false;
  bool gamma = false;
  bool gaussian_law = false;
};

/// dX = b(t,X)dt + eps*sigma(t,X)dB with optional observable f.
/// Immutable after construction; safe to share between threads.
struct Problem {
  std::string label;
  Coefficient b, b1, b2;
  Coefficient sigma, sigma1, sigma2;
  bool has_f = false;
  Coefficient f, f1, f2;
  double x0 = 0.0;
  double horizon = 1.0;
  OracleFlags oracle;

  bool sigma_state_free() const noexcept { return sigma1.is_zero() && sigma2.is_zero(); }
};

std::vector<std::string> builtin_names();

/// Accepts full names (P1_ou) or their prefix tag (P1).
/// Throws InvalidArgument listing valid names.
Problem builtin(std::string_view name);

/// Replace (or attach) the observable f with its derivatives.
Problem with_observable(Problem p, std::string_view f, std::string_view f1, std::string_view f2);

/// Parse a JSON configuration {label, b, b1, b2, sigma, sigma1, sigma2,
/// f, f1, f2, x0, horizon}. Coefficients are expression strings (numbers
/// are accepted as literals).
Problem load_problem(std::string_view document);
Problem load_problem_file(const std::filesystem::path& path);

/// JSON text accepted by load_problem.
std::string serialize(const Problem& p);

struct GridSample {
  double t = 0.0;
  double x = 0.0;
  double value = 0.0;
};

struct AssumptionCheck {
  std::string name;
  bool passed = true;
  double worst = 0.0;
  std::optional<GridSample> witness;  // set on failure
  std::string detail;
};

struct ValidationReport {
  std::vector<AssumptionCheck> checks;
  double L_estimate = 0.0;
  double max_b1 = 0.0, max_b2 = 0.0, max_sigma1 = 0.0, max_sigma2 = 0.0;
  std::optional<double> f1_min;
  double growth_ratio = 0.0;
  std::string grid;

  bool passed() const noexcept;
};

/// Sampling screen of the standing assumptions (linear growth, bounded
/// derivatives, f' bounded below). Non-exhaustive by construction: a
/// derivative whose maximum keeps growing when the x-box is doubled is
/// flagged as unbounded. Throws InvalidArgument when density < 8.
ValidationReport validate(const Problem& p, int density);

std::string to_text(const ValidationReport& r);

}  // namespace snfl
