#pragma once

// Streaming recursion for the mixing distribution:
//
//   g_{n+1}(theta_j) = (1 - alpha_{n+1}) g_n(theta_j) + alpha_{n+1} g_n(theta_j | Y_{n+1}),
//
// one O(d) pass per observation regardless of n.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "qbeb/learning_rate.hpp"
#include "qbeb/poisson_model.hpp"

namespace qbeb {

/// Called every `every` updates with the current snapshot and n.
struct SnapshotSink {
  std::uint64_t every = 0;
  std::function<void(const MixingWeights&, std::uint64_t)> on_snapshot;
};

class NewtonState {
 public:
  /// Starts at n = 0 with g0 (uniform when omitted). Throws ConfigError if
  /// g0 lives on a different grid.
  NewtonState(GridPtr grid, RateSchedule rate, std::optional<MixingWeights> g0 = std::nullopt);

  /// Restores a state at step n; used by deserialization.
  NewtonState(GridPtr grid, RateSchedule rate, std::vector<double> weights, std::uint64_t n);

  /// Consumes one count. On DegenerateLikelihood the state is unchanged.
  void update(Count y);

  /// Folds update over `ys`; a degenerate count aborts with its stream index
  /// in the message, leaving the state after the last good update.
  void update_stream(std::span<const Count> ys, const SnapshotSink& sink = {});

  /// Immutable view of g_n. Later updates never modify a returned snapshot.
  MixingWeights snapshot() const;

  std::uint64_t n() const noexcept { return n_; }
  const RateSchedule& rate() const noexcept { return rate_; }
  const Grid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  std::span<const double> weights() const noexcept { return *weights_; }
  KernelCache& cache() const noexcept { return *cache_; }

 private:
  GridPtr grid_;
  RateSchedule rate_;
  std::shared_ptr<std::vector<double>> weights_;
  std::vector<double> scratch_;
  std::shared_ptr<KernelCache> cache_;
  std::uint64_t n_ = 0;
};

/// Functional form of NewtonState::update.
NewtonState updated(NewtonState state, Count y);

/// max_j |E[g_{n+1}(theta_j) | g_n] - g_n(theta_j)| with Y ~ p_{g_n} and the
/// expectation truncated at y_max. Zero up to truncation and rounding.
double martingale_residual(const NewtonState& state, Count y_max);

}  // namespace qbeb
