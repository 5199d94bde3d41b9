#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "snfl/experiment.hpp"

namespace snfl {

inline constexpr const char* kVersion = "0.1.0";

/// Creates runs/<UTC timestamp>-<label> below `root`, or `out` verbatim
/// when it is non-empty. A numeric suffix avoids clobbering an existing run.
std::filesystem::path make_run_directory(const std::string& label, const std::string& out,
                                         const std::filesystem::path& root = "runs");

/// meta.json: version, verb, label, seed, mesh and the full resolved plan.
void write_meta(const std::filesystem::path& dir, std::string_view verb, const std::string& label,
                const SweepPlan& plan);

void write_reports_csv(std::span<const SweepPoint> points, std::ostream& os);
void write_ratefits_csv(std::span<const NamedFit> fits, std::ostream& os);
void write_components_csv(std::span<const SweepPoint> points, std::ostream& os);

/// plan.json, reports.csv, ratefits.csv, bound_components.csv and meta.json.
void write_sweep(const std::filesystem::path& dir, const SweepResult& r, std::string_view verb = "sweep");

void write_lower_bound(const std::filesystem::path& dir, const LowerBoundResult& r);
void write_volterra(const std::filesystem::path& dir, const VolterraTable& table, double p0);

struct PersistedFit {
  std::string quantity;
  bool ok = false;
  double slope = 0.0, slope_se = 0.0, intercept = 0.0, r2 = 0.0;
  std::size_t used = 0, excluded = 0;
  std::string message;
};

struct PersistedReport {
  DistanceReport report;
  bool ok = false;
  std::string error;
};

struct PersistedRun {
  SweepPlan plan;
  std::vector<PersistedReport> reports;
  std::vector<PersistedFit> fits;
  std::vector<BoundComponents> components;

  const PersistedFit* fit(std::string_view quantity) const;
};

/// Throws Error naming the first missing or malformed file.
PersistedRun read_run(const std::filesystem::path& dir);

}  // namespace snfl
