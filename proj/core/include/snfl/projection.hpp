#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace snfl {

enum class ProjectionMethod { markov_regression, branching };

const char* to_string(ProjectionMethod m) noexcept;

/// Equal-probability edges (bins+1 values) from a sample; duplicate edges
/// collapse, so a degenerate sample yields a single bin.
std::vector<double> quantile_edges(std::vector<double> xs, std::size_t bins);

/// Table g(r, x) ~ E[target_r | X_r = x] built from x-binned means per time
/// slice. Lookups interpolate linearly between cell centers (mean x of each
/// cell) and stay flat outside the populated range.
class ConditionalProjection {
public:
  struct Cell {
    double center = 0.0;
    double mean = 0.0;
    double stderr_mean = 0.0;
    std::size_t count = 0;
  };
  struct Slice {
    std::vector<double> edges;
    std::vector<Cell> cells;  ///< populated cells after merging
    std::size_t marked = 0;   ///< original bins that were empty
  };

  ConditionalProjection() : outside_(std::make_shared<std::atomic<std::size_t>>(0)) {}

  double operator()(std::size_t r, double x) const noexcept;

  std::size_t slices() const noexcept { return slices_.size(); }
  const Slice& slice(std::size_t r) const { return slices_.at(r); }
  ProjectionMethod method() const noexcept { return method_; }
  /// Lookups that landed outside the populated cell centers.
  std::size_t fallback_lookups() const noexcept { return outside_->load(std::memory_order_relaxed); }

private:
  friend class ProjectionAccumulator;
  std::vector<Slice> slices_;
  ProjectionMethod method_ = ProjectionMethod::markov_regression;
  std::shared_ptr<std::atomic<std::size_t>> outside_;
};

/// Per-(slice, bin) sums; mergeable so blocks of paths can be reduced in a
/// fixed order.
class ProjectionAccumulator {
public:
  ProjectionAccumulator() = default;
  explicit ProjectionAccumulator(std::shared_ptr<const std::vector<std::vector<double>>> edges);

  void add(std::size_t r, double x, double y) noexcept;
  void merge(const ProjectionAccumulator& other);

  /// Cells with fewer than min_count samples merge into a neighbour.
  ConditionalProjection finalize(std::size_t min_count, ProjectionMethod method) const;

private:
  struct Stat {
    double n = 0, sx = 0, sy = 0, syy = 0;
  };
  std::shared_ptr<const std::vector<std::vector<double>>> edges_;
  std::vector<std::vector<Stat>> stats_;
};

/// Callable view (slice, x) -> value used by the functionals.
using ProjectionFn = std::function<double(std::size_t, double)>;

inline ProjectionFn view(const ConditionalProjection& p) {
  return [&p](std::size_t r, double x) { return p(r, x); };
}

}  // namespace snfl
