#pragma once

// k-dimensional counts with independent Poisson coordinates. The mixing
// distribution lives on the product grid Theta_d^k, D = d^k atoms indexed
// lexicographically (first coordinate most significant).

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "qbeb/learning_rate.hpp"
#include "qbeb/poisson_model.hpp"

namespace qbeb {

inline constexpr std::uint64_t kProductGridCap = 1'000'000;
/// Largest D accepted by multi_clt_covariance.
inline constexpr std::uint64_t kCovarianceCap = 10'000;

class ProductGrid {
 public:
  /// Throws ConfigError for k == 0 or d^k > cap.
  ProductGrid(GridPtr base, unsigned k, std::uint64_t cap = kProductGridCap);

  const Grid& base() const noexcept { return *base_; }
  const GridPtr& base_ptr() const noexcept { return base_; }
  unsigned k() const noexcept { return k_; }
  std::size_t size() const noexcept { return size_; }

  /// Base-grid index of coordinate c of atom i.
  std::size_t digit(std::size_t i, unsigned c) const noexcept { return (i / stride_[c]) % base_->size(); }
  std::vector<std::size_t> tuple(std::size_t i) const;
  std::size_t index(std::span<const std::size_t> tuple) const;
  double theta(std::size_t i, unsigned c) const noexcept { return (*base_)[digit(i, c)]; }

  bool operator==(const ProductGrid& o) const { return k_ == o.k_ && *base_ == *o.base_; }

 private:
  GridPtr base_;
  unsigned k_;
  std::size_t size_;
  std::vector<std::size_t> stride_;
};

using ProductGridPtr = std::shared_ptr<const ProductGrid>;

class MultiMixingWeights {
 public:
  /// Validates nonnegativity and the sum (within sum_tol), then renormalizes.
  MultiMixingWeights(ProductGridPtr grid, std::vector<double> weights, double sum_tol = 1e-9);

  static MultiMixingWeights uniform(ProductGridPtr grid);
  /// Tensor product of per-coordinate weights on the same base grid.
  static MultiMixingWeights product(std::span<const MixingWeights> factors);
  static MultiMixingWeights adopt(ProductGridPtr grid, std::shared_ptr<const std::vector<double>> w) {
    return MultiMixingWeights(Trusted{}, std::move(grid), std::move(w));
  }

  const ProductGrid& grid() const noexcept { return *grid_; }
  const ProductGridPtr& grid_ptr() const noexcept { return grid_; }
  std::span<const double> weights() const noexcept { return *weights_; }
  double operator[](std::size_t i) const { return (*weights_)[i]; }
  std::size_t size() const noexcept { return weights_->size(); }

  /// Marginal pmf of coordinate c on the base grid.
  MixingWeights marginal(unsigned c) const;

 private:
  struct Trusted {};
  MultiMixingWeights(Trusted, ProductGridPtr grid, std::shared_ptr<const std::vector<double>> w)
      : grid_(std::move(grid)), weights_(std::move(w)) {}

  ProductGridPtr grid_;
  std::shared_ptr<const std::vector<double>> weights_;
};

/// sum_c log k(y_c | theta_c).
double multi_kernel(std::span<const Count> y, std::span<const double> theta);

/// log k(y | atom i) for every atom of the product grid.
void multi_log_kernel_column(const ProductGrid& grid, std::span<const Count> y, std::span<double> out);

double log_multi_mixture_pmf(const MultiMixingWeights& g, std::span<const Count> y);

class MultiNewtonState {
 public:
  MultiNewtonState(ProductGridPtr grid, RateSchedule rate,
                   std::optional<MultiMixingWeights> g0 = std::nullopt);
  /// Restores a state at step n without renormalizing.
  MultiNewtonState(ProductGridPtr grid, RateSchedule rate, std::vector<double> weights, std::uint64_t n);

  /// Throws DegenerateLikelihood (state unchanged) or ConfigError on a
  /// count vector of the wrong length.
  void update(std::span<const Count> y);

  MultiMixingWeights snapshot() const;
  std::uint64_t n() const noexcept { return n_; }
  const RateSchedule& rate() const noexcept { return rate_; }
  const ProductGrid& grid() const noexcept { return *grid_; }
  std::span<const double> weights() const noexcept { return *weights_; }

 private:
  ProductGridPtr grid_;
  RateSchedule rate_;
  std::shared_ptr<std::vector<double>> weights_;
  std::vector<double> column_;
  std::vector<double> scratch_;
  std::shared_ptr<KernelCache> cache_;
  std::uint64_t n_ = 0;
};

/// (y_j + 1) p_g(y + e_j) / p_g(y).
double multi_estimate(const MultiMixingWeights& g, std::span<const Count> y, unsigned j);

/// W(y) over the lattice {0..y_max}^k. Throws ConfigError for D > kCovarianceCap.
Eigen::MatrixXd multi_clt_covariance(const MultiMixingWeights& g, std::span<const Count> y, Count y_max);

/// Regret summed over coordinates with g_b as oracle, over {0..y_max}^k.
double multi_regret(const MultiMixingWeights& g_a, const MultiMixingWeights& g_b, Count y_max);

std::vector<std::byte> serialize_multi_state(const MultiNewtonState& state);
MultiNewtonState deserialize_multi_state(std::span<const std::byte> bytes);
void save_multi_state(const MultiNewtonState& state, const std::filesystem::path& path);
MultiNewtonState load_multi_state(const std::filesystem::path& path);

}  // namespace qbeb
