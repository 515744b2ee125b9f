#include "qbeb/grid_builder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qbeb/errors.hpp"

namespace qbeb {

void GridSpec::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be > 0");
  if (k < 2) throw ConfigError("moment order k must be >= 2");
  if (!(m_k > 0.0) || !std::isfinite(m_k))
    throw ConfigError("moment bound m_k must be > 0 (all-zero data gives m_k = 0)");
  if (d_cap && *d_cap < 2) throw ConfigError("d_cap must be >= 2");
}

bool grid_size_condition(const GridSpec& spec, std::uint64_t n) {
  const double nd = static_cast<double>(n);
  if (!(nd * spec.eta > 1.0)) return false;
  const double lhs = std::pow(nd, 1.0 - spec.k) * std::log(nd * spec.eta) * spec.m_k;
  return lhs <= std::pow(spec.eta, spec.k);
}

std::uint64_t kl_grid_size(const GridSpec& spec) {
  spec.validate();
  // First integer strictly above 1/eta; grid_size_condition rechecks n*eta > 1.
  auto n = static_cast<std::uint64_t>(std::floor(1.0 / spec.eta));
  if (n == 0) n = 1;
  // n^{1-k} log(n eta) peaks at n = e^{1/(k-1)} / eta and decreases after
  // it, so the scan only has to cover the rising part; past the peak the
  // first admissible n is found by bisection.
  const double peak = std::exp(1.0 / (spec.k - 1)) / spec.eta;
  const auto scan_end = static_cast<std::uint64_t>(std::min(std::ceil(peak) + 1.0, static_cast<double>(kGridScanLimit)));
  for (; n <= scan_end; ++n) {
    if (grid_size_condition(spec, n)) return n;
  }
  if (grid_size_condition(spec, kGridScanLimit)) {
    std::uint64_t lo = scan_end, hi = kGridScanLimit;  // lo fails, hi passes
    while (hi - lo > 1) {
      const std::uint64_t mid = lo + (hi - lo) / 2;
      (grid_size_condition(spec, mid) ? hi : lo) = mid;
    }
    return hi;
  }
  throw SpecInfeasible("no grid size up to " + std::to_string(kGridScanLimit) +
                       " satisfies the discretization condition (eta=" +
                       std::to_string(spec.eta) + ", m_k=" + std::to_string(spec.m_k) + ")");
}

Grid build_equispaced_grid(const GridSpec& spec) {
  const std::uint64_t d = kl_grid_size(spec);
  const double last = static_cast<double>(d) * spec.eta;
  if (spec.d_cap) return Grid::equispaced(spec.eta, last, *spec.d_cap);
  std::vector<double> pts(d);
  for (std::uint64_t i = 0; i < d; ++i) pts[i] = static_cast<double>(i + 1) * spec.eta;
  return Grid(std::move(pts));
}

double empirical_moment(std::span<const Count> ys, int k) {
  if (ys.empty()) throw ConfigError("empirical moment of an empty sample");
  double s = 0.0;
  for (Count y : ys) s += std::pow(static_cast<double>(y), k);
  return s / static_cast<double>(ys.size());
}

Discretization binned_discretization(const PriorSpec& prior, GridPtr grid) {
  const std::size_t d = grid->size();
  if (d >= 3 && !grid->is_equispaced(1e-6))
    throw ConfigError("binned discretization needs an equispaced grid");
  const double h = d >= 2 ? grid->spacing() : grid->front();
  const auto pts = grid->points();

  Discretization out{MixingWeights::uniform(grid)};
  const double at_zero = prior.cdf(0.0);
  out.mass_at_zero = at_zero > 0.0;
  const double first_lower = pts[0] - h;
  if (first_lower > 0.0) out.dropped_mass = prior.cdf(first_lower) - at_zero;

  std::vector<double> w(d);
  double prev = first_lower > 0.0 ? prior.cdf(first_lower) : at_zero;
  for (std::size_t i = 0; i < d; ++i) {
    if (i + 1 == d) {
      w[i] = 1.0 - prev;
    } else {
      const double c = prior.cdf(pts[i]);
      w[i] = c - prev;
      prev = c;
    }
    w[i] = std::max(w[i], 0.0);
  }
  w[0] += at_zero;
  out.weights = MixingWeights::normalized(std::move(grid), std::move(w));
  return out;
}

double kl_discretization_gap(const PriorSpec& prior, const MixingWeights& g, Count y_max) {
  const auto p_true = prior.marginal_pmf(y_max);
  double kl = 0.0;
  for (Count y = 0; y <= y_max; ++y) {
    const double p = p_true[y];
    if (!(p > 0.0)) continue;
    const double log_q = log_mixture_pmf(g, y);
    if (log_q == -std::numeric_limits<double>::infinity())
      return std::numeric_limits<double>::infinity();
    kl += p * (std::log(p) - log_q);
  }
  return kl;
}

}  // namespace qbeb
