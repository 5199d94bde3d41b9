#include "snfl/projection.hpp"

#include <algorithm>
#include <cmath>

#include "snfl/error.hpp"

namespace snfl {

const char* to_string(ProjectionMethod m) noexcept {
  return m == ProjectionMethod::branching ? "branching" : "markov_regression";
}

std::vector<double> quantile_edges(std::vector<double> xs, std::size_t bins) {
  if (xs.empty()) throw InvalidArgument("quantile_edges: empty sample");
  if (bins == 0) throw InvalidArgument("quantile_edges: bins must be positive");
  std::sort(xs.begin(), xs.end());
  std::vector<double> e;
  e.reserve(bins + 1);
  const std::size_t n = xs.size();
  for (std::size_t k = 0; k <= bins; ++k) {
    const std::size_t idx = std::min(n - 1, k * n / bins);
    const double v = k == bins ? xs.back() : xs[idx];
    if (e.empty() || v > e.back()) e.push_back(v);
  }
  if (e.size() == 1) e.push_back(e[0]);  // degenerate sample: one bin
  return e;
}

double ConditionalProjection::operator()(std::size_t r, double x) const noexcept {
  const auto& cells = slices_[r].cells;
  if (cells.size() == 1) return cells[0].mean;
  if (x <= cells.front().center) {
    if (x < cells.front().center) outside_->fetch_add(1, std::memory_order_relaxed);
    return cells.front().mean;
  }
  if (x >= cells.back().center) {
    if (x > cells.back().center) outside_->fetch_add(1, std::memory_order_relaxed);
    return cells.back().mean;
  }
  const auto it = std::upper_bound(cells.begin(), cells.end(), x,
                                   [](double v, const Cell& c) { return v < c.center; });
  const Cell& hi = *it;
  const Cell& lo = *(it - 1);
  const double w = (x - lo.center) / (hi.center - lo.center);
  return lo.mean + w * (hi.mean - lo.mean);
}

ProjectionAccumulator::ProjectionAccumulator(std::shared_ptr<const std::vector<std::vector<double>>> edges)
    : edges_(std::move(edges)) {
  stats_.resize(edges_->size());
  for (std::size_t r = 0; r < edges_->size(); ++r) stats_[r].resize((*edges_)[r].size() - 1);
}

void ProjectionAccumulator::add(std::size_t r, double x, double y) noexcept {
  const auto& e = (*edges_)[r];
  std::size_t b = 0;
  if (e.size() > 2) {
    b = static_cast<std::size_t>(std::upper_bound(e.begin() + 1, e.end() - 1, x) - (e.begin() + 1));
  }
  Stat& s = stats_[r][b];
  s.n += 1.0;
  s.sx += x;
  s.sy += y;
  s.syy += y * y;
}

void ProjectionAccumulator::merge(const ProjectionAccumulator& o) {
  if (stats_.empty()) {
    *this = o;
    return;
  }
  for (std::size_t r = 0; r < stats_.size(); ++r)
    for (std::size_t b = 0; b < stats_[r].size(); ++b) {
      stats_[r][b].n += o.stats_[r][b].n;
      stats_[r][b].sx += o.stats_[r][b].sx;
      stats_[r][b].sy += o.stats_[r][b].sy;
      stats_[r][b].syy += o.stats_[r][b].syy;
    }
}

ConditionalProjection ProjectionAccumulator::finalize(std::size_t min_count, ProjectionMethod method) const {
  ConditionalProjection cp;
  cp.method_ = method;
  cp.slices_.resize(stats_.size());
  const double need = static_cast<double>(std::max<std::size_t>(min_count, 1));
  for (std::size_t r = 0; r < stats_.size(); ++r) {
    auto& sl = cp.slices_[r];
    sl.edges = (*edges_)[r];
    std::vector<Stat> merged;
    Stat run;
    for (const Stat& s : stats_[r]) {
      if (s.n == 0) ++sl.marked;
      run.n += s.n;
      run.sx += s.sx;
      run.sy += s.sy;
      run.syy += s.syy;
      if (run.n >= need) {
        merged.push_back(run);
        run = Stat{};
      }
    }
    if (run.n > 0) {
      if (merged.empty()) {
        merged.push_back(run);
      } else {
        Stat& last = merged.back();
        last.n += run.n;
        last.sx += run.sx;
        last.sy += run.sy;
        last.syy += run.syy;
      }
    }
    if (merged.empty()) throw InvalidArgument("conditional projection: slice " + std::to_string(r) + " has no samples");
    for (const Stat& s : merged) {
      ConditionalProjection::Cell c;
      c.count = static_cast<std::size_t>(s.n);
      c.center = s.sx / s.n;
      c.mean = s.sy / s.n;
      const double var = s.n > 1 ? std::max(0.0, (s.syy - s.n * c.mean * c.mean) / (s.n - 1)) : 0.0;
      c.stderr_mean = std::sqrt(var / s.n);
      sl.cells.push_back(c);
    }
    // cells whose centers coincide (point-mass slices) collapse to one
    std::vector<ConditionalProjection::Cell> uniq;
    for (const auto& c : sl.cells) {
      if (!uniq.empty() && !(c.center > uniq.back().center)) {
        auto& u = uniq.back();
        const double n = static_cast<double>(u.count + c.count);
        u.mean = (u.mean * u.count + c.mean * c.count) / n;
        u.count += c.count;
      } else {
        uniq.push_back(c);
      }
    }
    sl.cells = std::move(uniq);
  }
  return cp;
}

}  // namespace snfl
