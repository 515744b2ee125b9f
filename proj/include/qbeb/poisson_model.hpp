#pragma once

// Core types and exact Poisson-mixture arithmetic. Everything is evaluated in
// log space: grids used in practice reach theta ~ 1e4, where e^{-theta}
// theta^y underflows long before the mixture itself does.

#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <span>
#include <vector>

namespace qbeb {

using Count = std::uint64_t;

/// Ordered support points 0 < theta_1 < ... < theta_d of a mixing distribution.
class Grid {
 public:
  /// Throws ConfigError unless the points are nonempty, finite, strictly
  /// positive and strictly increasing.
  explicit Grid(std::vector<double> points);

  /// `d` equispaced points from `first` to `last` inclusive (d == 1 requires
  /// first == last).
  static Grid equispaced(double first, double last, std::size_t d);

  std::size_t size() const noexcept { return points_.size(); }
  double operator[](std::size_t j) const { return points_[j]; }
  double front() const noexcept { return points_.front(); }
  double back() const noexcept { return points_.back(); }
  std::span<const double> points() const noexcept { return points_; }
  std::span<const double> log_points() const noexcept { return log_points_; }

  /// True if consecutive gaps agree to `rel_tol` of the mean gap.
  bool is_equispaced(double rel_tol = 1e-9) const;
  /// Mean gap (back - front) / (d - 1); 0 for a single point.
  double spacing() const noexcept;

  bool operator==(const Grid& other) const { return points_ == other.points_; }

 private:
  std::vector<double> points_;
  std::vector<double> log_points_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(std::vector<double> points) {
  return std::make_shared<const Grid>(std::move(points));
}

/// A probability mass function on a Grid. Cheap to copy: the weight buffer is
/// shared and never mutated after construction.
class MixingWeights {
 public:
  /// Validates and renormalizes. Throws ConfigError on a length mismatch, a
  /// negative or non-finite weight, or a sum further than `sum_tol` from 1.
  MixingWeights(GridPtr grid, std::vector<double> weights, double sum_tol = 1e-9);

  /// Divides an arbitrary nonnegative vector by its sum.
  static MixingWeights normalized(GridPtr grid, std::vector<double> raw);
  static MixingWeights uniform(GridPtr grid);
  static MixingWeights point_mass(GridPtr grid, std::size_t j);
  /// Wraps an already-normalized buffer without validation.
  static MixingWeights adopt(GridPtr grid, std::shared_ptr<const std::vector<double>> w) {
    return MixingWeights(Trusted{}, std::move(grid), std::move(w));
  }

  const Grid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  std::span<const double> weights() const noexcept { return *weights_; }
  double operator[](std::size_t j) const { return (*weights_)[j]; }
  std::size_t size() const noexcept { return weights_->size(); }

 private:
  struct Trusted {};
  MixingWeights(Trusted, GridPtr grid, std::shared_ptr<const std::vector<double>> w)
      : grid_(std::move(grid)), weights_(std::move(w)) {}

  GridPtr grid_;
  std::shared_ptr<const std::vector<double>> weights_;
};

/// Multiset of observed counts stored as y -> n_y.
class CountHistogram {
 public:
  CountHistogram() = default;
  explicit CountHistogram(std::span<const Count> ys);

  void add(Count y, std::uint64_t multiplicity = 1);

  std::uint64_t count(Count y) const;
  std::uint64_t total() const noexcept { return total_; }
  bool empty() const noexcept { return total_ == 0; }
  const std::map<Count, std::uint64_t>& entries() const noexcept { return entries_; }
  Count max_y() const;

 private:
  std::map<Count, std::uint64_t> entries_;
  std::uint64_t total_ = 0;
};

/// Lazily filled table of log k(y | theta_j). Columns are created on first
/// request and never modified afterwards, so returned spans stay valid for the
/// cache's lifetime. Concurrent readers are fine; extension takes an
/// exclusive lock.
class KernelCache {
 public:
  explicit KernelCache(GridPtr grid);

  /// log k(y | theta_j) for j = 0..d-1.
  std::span<const double> column(Count y);

  const Grid& grid() const noexcept { return *grid_; }
  /// Number of cached columns.
  std::size_t columns() const;

 private:
  GridPtr grid_;
  mutable std::shared_mutex mutex_;
  std::map<Count, std::vector<double>> table_;
};

/// log of e^{-theta} theta^y / y!. Throws DomainError unless theta > 0.
double log_poisson_kernel(Count y, double theta);

/// Fills `out` with log k(y | theta_j) for every grid point.
void log_kernel_column(const Grid& grid, Count y, std::span<double> out);

/// log p_g(y) = log sum_j k(y|theta_j) g_j, skipping zero-weight atoms.
double log_mixture_pmf(const MixingWeights& g, Count y);
double mixture_pmf(const MixingWeights& g, Count y);

/// g(theta_j | y). Throws DegenerateLikelihood when p_g(y) underflows.
MixingWeights posterior_weights(const MixingWeights& g, Count y);

/// E_g[theta | y] = sum_j theta_j g(theta_j | y).
double posterior_mean(const MixingWeights& g, Count y);

/// Default series truncation theta_d + 20 sqrt(theta_d), rounded up.
Count default_y_max(const Grid& grid);

}  // namespace qbeb
