#pragma once

// Support grids for the mixing distribution and their KL discretization
// guarantee.
//
// The equispaced grid {i * eta : i = 1..d_eta} uses the smallest
//   d_eta = inf { n : n > 1/eta  and  n^{1-k} log(n eta) m_k <= eta^k },
// where m_k bounds the k-th moment of the marginal of Y. Binning a prior G
// onto that grid, w_i = G((theta_{i-1}, theta_i]), gives a marginal within
// KL 2*eta of p_G.

#include <cstdint>
#include <optional>
#include <span>

#include "qbeb/poisson_model.hpp"
#include "qbeb/priors.hpp"

namespace qbeb {

struct GridSpec {
  double eta = 0.025;
  int k = 2;
  double m_k = 1.0;
  std::optional<std::size_t> d_cap{};

  /// Throws ConfigError on eta <= 0, k < 2, m_k <= 0 or d_cap < 2.
  void validate() const;
};

inline constexpr std::uint64_t kGridScanLimit = 1'000'000'000;

/// True if n satisfies both grid-size conditions for `spec`.
bool grid_size_condition(const GridSpec& spec, std::uint64_t n);

/// Smallest n satisfying grid_size_condition: an ascending scan from
/// floor(1/eta) over the rising part of the condition, bisection past it.
/// Throws SpecInfeasible when nothing below kGridScanLimit qualifies.
std::uint64_t kl_grid_size(const GridSpec& spec);

/// {eta, 2 eta, ..., d_eta eta}; with d_cap set, d_cap equispaced points
/// spanning the same endpoints.
Grid build_equispaced_grid(const GridSpec& spec);

/// n^{-1} sum_i y_i^k. Throws ConfigError on empty input.
double empirical_moment(std::span<const Count> ys, int k);

struct Discretization {
  MixingWeights weights;
  /// Prior mass below the first bin, (0, theta_1 - h], dropped before
  /// renormalization.
  double dropped_mass = 0.0;
  /// The prior had an atom at 0; its mass went to theta_1.
  bool mass_at_zero = false;
};

/// Bins G onto an equispaced grid: atom i receives G((theta_i - h, theta_i]),
/// the last atom also absorbs the upper tail.
Discretization binned_discretization(const PriorSpec& prior, GridPtr grid);

/// sum_{y <= y_max} p_G(y) log(p_G(y) / p_g(y)). Returns +inf when p_g(y)
/// vanishes where p_G(y) does not.
double kl_discretization_gap(const PriorSpec& prior, const MixingWeights& g, Count y_max);

}  // namespace qbeb
