#include "qbeb/poisson_model.hpp"

#include <cmath>
#include <mutex>
#include <numeric>
#include <string>

#include "qbeb/errors.hpp"
#include "qbeb/numeric.hpp"

namespace qbeb {

Grid::Grid(std::vector<double> points) : points_(std::move(points)) {
  if (points_.empty()) throw ConfigError("grid must contain at least one point");
  for (std::size_t j = 0; j < points_.size(); ++j) {
    if (!std::isfinite(points_[j]) || points_[j] <= 0.0)
      throw ConfigError("grid point " + std::to_string(j) + " is not a finite positive value");
    if (j > 0 && !(points_[j] > points_[j - 1]))
      throw ConfigError("grid points must be strictly increasing (index " + std::to_string(j) +
                        ")");
  }
  log_points_.resize(points_.size());
  std::transform(points_.begin(), points_.end(), log_points_.begin(),
                 [](double t) { return std::log(t); });
}

Grid Grid::equispaced(double first, double last, std::size_t d) {
  if (d == 0) throw ConfigError("equispaced grid needs d >= 1");
  if (d == 1) {
    if (first != last) throw ConfigError("single-point grid needs first == last");
    return Grid({first});
  }
  std::vector<double> pts(d);
  const double h = (last - first) / static_cast<double>(d - 1);
  for (std::size_t i = 0; i < d; ++i) pts[i] = first + h * static_cast<double>(i);
  pts.back() = last;
  return Grid(std::move(pts));
}

bool Grid::is_equispaced(double rel_tol) const {
  if (points_.size() < 3) return true;
  const double h = spacing();
  for (std::size_t j = 1; j < points_.size(); ++j) {
    if (std::abs((points_[j] - points_[j - 1]) - h) > rel_tol * h) return false;
  }
  return true;
}

double Grid::spacing() const noexcept {
  if (points_.size() < 2) return 0.0;
  return (points_.back() - points_.front()) / static_cast<double>(points_.size() - 1);
}

// ---------------------------------------------------------------------------

MixingWeights::MixingWeights(GridPtr grid, std::vector<double> weights, double sum_tol)
    : grid_(std::move(grid)) {
  if (!grid_) throw ConfigError("mixing weights need a grid");
  if (weights.size() != grid_->size())
    throw ConfigError("weight vector has length " + std::to_string(weights.size()) +
                      " but the grid has " + std::to_string(grid_->size()) + " points");
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("weights must be finite and >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > sum_tol)
    throw ConfigError("weights sum to " + std::to_string(sum) + ", expected 1");
  for (double& w : weights) w /= sum;
  weights_ = std::make_shared<const std::vector<double>>(std::move(weights));
}

MixingWeights MixingWeights::normalized(GridPtr grid, std::vector<double> raw) {
  double sum = 0.0;
  for (double w : raw) {
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("weights must be finite and >= 0");
    sum += w;
  }
  if (!(sum > 0.0)) throw ConfigError("weights have zero total mass");
  for (double& w : raw) w /= sum;
  return MixingWeights(std::move(grid), std::move(raw));
}

MixingWeights MixingWeights::uniform(GridPtr grid) {
  const std::size_t d = grid->size();
  return MixingWeights(std::move(grid), std::vector<double>(d, 1.0 / static_cast<double>(d)));
}

MixingWeights MixingWeights::point_mass(GridPtr grid, std::size_t j) {
  if (j >= grid->size()) throw ConfigError("point-mass index out of range");
  std::vector<double> w(grid->size(), 0.0);
  w[j] = 1.0;
  return MixingWeights(std::move(grid), std::move(w));
}

// ---------------------------------------------------------------------------

CountHistogram::CountHistogram(std::span<const Count> ys) {
  for (Count y : ys) add(y);
}

void CountHistogram::add(Count y, std::uint64_t multiplicity) {
  if (multiplicity == 0) return;
  entries_[y] += multiplicity;
  total_ += multiplicity;
}

std::uint64_t CountHistogram::count(Count y) const {
  auto it = entries_.find(y);
  return it == entries_.end() ? 0 : it->second;
}

Count CountHistogram::max_y() const {
  if (entries_.empty()) throw ConfigError("empty histogram has no maximum");
  return entries_.rbegin()->first;
}

// ---------------------------------------------------------------------------

KernelCache::KernelCache(GridPtr grid) : grid_(std::move(grid)) {}

std::span<const double> KernelCache::column(Count y) {
  {
    std::shared_lock lock(mutex_);
    auto it = table_.find(y);
    if (it != table_.end()) return it->second;
  }
  std::unique_lock lock(mutex_);
  auto [it, inserted] = table_.try_emplace(y);
  if (inserted) {
    it->second.resize(grid_->size());
    log_kernel_column(*grid_, y, it->second);
  }
  return it->second;
}

std::size_t KernelCache::columns() const {
  std::shared_lock lock(mutex_);
  return table_.size();
}

// ---------------------------------------------------------------------------

double log_poisson_kernel(Count y, double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta))
    throw DomainError("Poisson mean must be finite and > 0, got " + std::to_string(theta));
  const double yd = static_cast<double>(y);
  return -theta + yd * std::log(theta) - std::lgamma(yd + 1.0);
}

void log_kernel_column(const Grid& grid, Count y, std::span<double> out) {
  const double yd = static_cast<double>(y);
  const double lfact = std::lgamma(yd + 1.0);
  const auto pts = grid.points();
  const auto lpts = grid.log_points();
  for (std::size_t j = 0; j < pts.size(); ++j) out[j] = -pts[j] + yd * lpts[j] - lfact;
}

namespace {

std::vector<double> log_weights(const MixingWeights& g) {
  std::vector<double> lw(g.size());
  const auto w = g.weights();
  for (std::size_t j = 0; j < w.size(); ++j) lw[j] = safe_log(w[j]);
  return lw;
}

}  // namespace

double log_mixture_pmf(const MixingWeights& g, Count y) {
  std::vector<double> col(g.size());
  log_kernel_column(g.grid(), y, col);
  return log_sum_exp_pairs(log_weights(g), col);
}

double mixture_pmf(const MixingWeights& g, Count y) { return std::exp(log_mixture_pmf(g, y)); }

MixingWeights posterior_weights(const MixingWeights& g, Count y) {
  std::vector<double> col(g.size());
  log_kernel_column(g.grid(), y, col);
  const auto lw = log_weights(g);
  const double lp = log_sum_exp_pairs(lw, col);
  if (degenerate_log_mass(lp))
    throw DegenerateLikelihood(y, 0, "mixture assigns zero probability to y=" + std::to_string(y));
  std::vector<double> post(g.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < post.size(); ++j) {
    post[j] = lw[j] == kNegInf ? 0.0 : std::exp(lw[j] + col[j] - lp);
    sum += post[j];
  }
  for (double& p : post) p /= sum;
  return MixingWeights::adopt(g.grid_ptr(), std::make_shared<const std::vector<double>>(std::move(post)));
}

double posterior_mean(const MixingWeights& g, Count y) {
  const auto post = posterior_weights(g, y);
  const auto w = post.weights();
  const auto pts = g.grid().points();
  double m = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) m += pts[j] * w[j];
  return std::clamp(m, pts.front(), pts.back());
}

Count default_y_max(const Grid& grid) {
  const double t = grid.back();
  return static_cast<Count>(std::ceil(t + 20.0 * std::sqrt(t)));
}

}  // namespace qbeb
