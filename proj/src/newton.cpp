#include "qbeb/newton.hpp"

#include <cmath>
#include <string>

#include "qbeb/detail/newton_step.hpp"
#include "qbeb/errors.hpp"

namespace qbeb {

NewtonState::NewtonState(GridPtr grid, RateSchedule rate, std::optional<MixingWeights> g0)
    : grid_(std::move(grid)), rate_(std::move(rate)) {
  if (!grid_) throw ConfigError("Newton state needs a grid");
  if (g0) {
    if (g0->size() != grid_->size())
      throw ConfigError("initial weights have length " + std::to_string(g0->size()) +
                        ", grid has " + std::to_string(grid_->size()));
    if (!(g0->grid() == *grid_)) throw ConfigError("initial weights live on a different grid");
    weights_ = std::make_shared<std::vector<double>>(g0->weights().begin(), g0->weights().end());
  } else {
    weights_ = std::make_shared<std::vector<double>>(grid_->size(),
                                                     1.0 / static_cast<double>(grid_->size()));
  }
  scratch_.resize(grid_->size());
  cache_ = std::make_shared<KernelCache>(grid_);
}

NewtonState::NewtonState(GridPtr grid, RateSchedule rate, std::vector<double> weights,
                         std::uint64_t n)
    : NewtonState(grid, std::move(rate)) {
  // Validate without renormalizing so restored weights stay bit-identical.
  MixingWeights check(grid, weights, 1e-9);
  *weights_ = std::move(weights);
  n_ = n;
}

void NewtonState::update(Count y) {
  const auto column = cache_->column(y);
  const double log_p = detail::posterior_into(*weights_, column, scratch_);
  if (degenerate_log_mass(log_p))
    throw DegenerateLikelihood(y, n_,
                               "p_g(y) underflows for y=" + std::to_string(y) + " after n=" +
                                   std::to_string(n_) +
                                   " observations; the grid likely does not cover this count");
  const double a = rate_.at(n_ + 1);
  if (weights_.use_count() > 1) weights_ = std::make_shared<std::vector<double>>(*weights_);
  detail::blend_into(*weights_, scratch_, a);
  ++n_;
}

void NewtonState::update_stream(std::span<const Count> ys, const SnapshotSink& sink) {
  for (std::size_t i = 0; i < ys.size(); ++i) {
    try {
      update(ys[i]);
    } catch (const DegenerateLikelihood& e) {
      throw DegenerateLikelihood(e.y(), e.n(),
                                 "stream index " + std::to_string(i) + ": " + e.what());
    }
    if (sink.every > 0 && sink.on_snapshot && n_ % sink.every == 0)
      sink.on_snapshot(snapshot(), n_);
  }
}

MixingWeights NewtonState::snapshot() const {
  return MixingWeights::adopt(grid_, std::shared_ptr<const std::vector<double>>(weights_));
}

NewtonState updated(NewtonState state, Count y) {
  state.update(y);
  return state;
}

double martingale_residual(const NewtonState& state, Count y_max) {
  // E[g_{n+1,j}] - g_{n,j} = a * sum_y p(y) (g(j|y) - g_j).
  const auto g = state.weights();
  const std::size_t d = g.size();
  const double a = state.rate().at(state.n() + 1);
  std::vector<double> acc(d, 0.0), post(d), column(d);
  for (Count y = 0; y <= y_max; ++y) {
    log_kernel_column(state.grid(), y, column);
    const double log_p = detail::posterior_into(g, column, post);
    if (!std::isfinite(log_p)) continue;
    const double p = std::exp(log_p);
    for (std::size_t j = 0; j < d; ++j) acc[j] += p * (post[j] - g[j]);
  }
  double worst = 0.0;
  for (std::size_t j = 0; j < d; ++j) worst = std::max(worst, std::abs(a * acc[j]));
  return worst;
}

}  // namespace qbeb
