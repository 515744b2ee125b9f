#pragma once

// Synthetic compound data, error metrics, regret against an oracle mixing
// distribution, timing of the streaming update and experiment drivers.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qbeb/baselines.hpp"
#include "qbeb/grid_builder.hpp"
#include "qbeb/learning_rate.hpp"
#include "qbeb/newton.hpp"
#include "qbeb/poisson_model.hpp"
#include "qbeb/priors.hpp"

namespace qbeb {

struct CompoundSample {
  std::vector<double> thetas;
  std::vector<Count> ys;
};

/// theta_i ~ G, Y_i | theta_i ~ Poisson(theta_i), i = 1..n. Deterministic in seed.
CompoundSample generate_compound(const PriorSpec& prior, std::size_t n, std::uint64_t seed);

struct ErrorMetrics {
  double rmse = 0.0;
  double mad = 0.0;
};

/// Throws ConfigError on length mismatch or empty input.
ErrorMetrics rmse_mad(std::span<const double> thetas, std::span<const double> estimates);

struct RegretResult {
  double value = 0.0;
  /// Oracle marginal mass beyond y_max.
  double tail_mass = 0.0;
};

/// sum_{y <= y_max} (theta_hat_{g_a}(y) - theta_hat_{g_b}(y))^2 p_{g_b}(y),
/// with g_b as the oracle. Both must share a grid.
RegretResult regret_detail(const MixingWeights& g_a, const MixingWeights& g_b, Count y_max);
double regret(const MixingWeights& g_a, const MixingWeights& g_b, Count y_max);

/// Regret against a continuous oracle G: its Bayes rule and marginal come
/// from PriorSpec::marginal_pmf.
RegretResult regret_vs_prior(const MixingWeights& g, const PriorSpec& oracle, Count y_max);

/// (1/2) sum_j |a_j - b_j| on a shared grid.
double total_variation(const MixingWeights& a, const MixingWeights& b);

struct ExperimentConfig {
  PriorSpec prior;
  std::size_t n = 500;
  double eta = 0.025;
  int k = 2;
  std::optional<std::size_t> d_cap = 10'000;
  LearningRate rate{1.0, 0.99};
  std::vector<std::uint64_t> seeds{1};
  /// Fixed support grid. When absent the grid is built from the sample
  /// (eta, k, m_k = empirical k-th moment, d_cap); for an atoms prior the
  /// regret diagnostic uses the atoms themselves.
  GridPtr grid{};
  /// Series truncation; default_y_max(grid) when absent.
  std::optional<Count> y_max{};

  void validate() const;
};

struct MetricRow {
  std::string method;
  std::string prior;
  std::size_t n = 0;
  std::size_t d = 0;
  double eta = 0.0;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  double rmse = 0.0;
  double mad = 0.0;
  /// Negative when not measured.
  double cpu_per_update_ms = -1.0;
};

/// The support grid used for a sample under cfg.
GridPtr experiment_grid(const ExperimentConfig& cfg, std::span<const Count> ys);

/// One QB-EB replication: stream the sample through the recursion in order,
/// then estimate every theta_i with theta_hat_{g_n}(Y_i).
MetricRow run_qbeb_experiment(const ExperimentConfig& cfg, std::uint64_t seed);

/// One baseline replication on the same sample as run_qbeb_experiment.
MetricRow run_baseline_experiment(const ExperimentConfig& cfg, BaselineMethod method, std::uint64_t seed);

std::string metrics_csv_header();
std::string to_csv_row(const MetricRow& r);
/// Methods as columns, one RMSE and one MAD line per n (medians over seeds).
std::string metrics_markdown(const std::vector<MetricRow>& rows);

struct DecayDiagnostic {
  std::vector<std::uint64_t> checkpoints;
  /// regrets[s][c]: seed s at checkpoint c.
  std::vector<std::vector<double>> regrets;
  /// Total variation to the oracle at the last checkpoint, per seed.
  std::vector<double> final_tv;
  std::vector<double> slopes;
  double median_slope = 0.0;
  double median_final_tv = 0.0;
};

/// Least-squares slope of log regret against log n, per seed, then the
/// median. The oracle is cfg.prior, which must be an atoms prior; the grid is
/// cfg.grid or the atoms. Requires at least two increasing checkpoints.
/// `g0` overrides the uniform start (e.g. the oracle itself).
DecayDiagnostic regret_decay_diagnostic(const ExperimentConfig& cfg, std::span<const std::uint64_t> checkpoints,
                                        std::optional<MixingWeights> g0 = std::nullopt);

struct TimingConfig {
  PriorSpec prior;
  std::vector<std::size_t> d_values{};
  /// Inclusive n ranges; updates before the first window are warmup.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> windows{};
  double eta = 0.025;
  /// Upper grid endpoint; the grid is d points on [eta, theta_max].
  double theta_max = 10'000.0;
  LearningRate rate{1.0, 0.99};
  std::uint64_t seed = 1;
};

struct TimingRow {
  std::size_t d = 0;
  std::uint64_t n_lo = 0;
  std::uint64_t n_hi = 0;
  double median_ms = 0.0;
};

/// Median wall time of single updates inside each window, for every d.
std::vector<TimingRow> timing_harness(const TimingConfig& cfg);

double median(std::vector<double> v);

}  // namespace qbeb
