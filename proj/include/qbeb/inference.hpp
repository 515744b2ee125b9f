#pragma once

// Point estimates, asymptotic variance and credible intervals for
// theta_hat_g(y) = (y + 1) p_g(y + 1) / p_g(y).

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "qbeb/learning_rate.hpp"
#include "qbeb/newton.hpp"
#include "qbeb/poisson_model.hpp"

namespace qbeb {

/// (y + 1) p_g(y + 1) / p_g(y). Throws DegenerateLikelihood if p_g(y) or
/// p_g(y + 1) underflows.
double qb_estimate(const MixingWeights& g, Count y);

/// sum_{k >= n} alpha_k^2, by direct summation plus an Euler-Maclaurin tail.
double squared_rate_tail(const LearningRate& rate, std::uint64_t n);

/// b_n = 1 / sum_{k >= n} alpha_k^2. Throws DomainError for n == 0.
double tail_sum_bn(const LearningRate& rate, std::uint64_t n);

/// Leading-order closed form (2 gamma - 1) (alpha + n)^{2 gamma - 1}.
double tail_sum_bn_asymptotic(const LearningRate& rate, std::uint64_t n);

struct ScheduleCertificate {
  bool non_increasing = false;
  /// sum_n (alpha_n^2 b_n)^2 < inf. Analytic for the power schedule: the
  /// terms behave like ((2 gamma - 1) / n)^2.
  bool ratio_series_summable = false;
  /// Partial sum of the ratio series over the first `terms` terms.
  double ratio_series_partial = 0.0;
  std::uint64_t terms = 0;
};

ScheduleCertificate validate_power_schedule(const LearningRate& rate,
                                            std::uint64_t terms = 100'000);

struct VarianceResult {
  double value = 0.0;
  /// 1 - sum_{z <= y_max} p_g(z), the mass the truncated expectation misses.
  double tail_mass = 0.0;
};

/// W_g(y) = theta_hat^2 E_{Z ~ p_g}[ (sum_j g(theta_j | Z) (k(y+1|theta_j)/p_g(y+1)
///           - k(y|theta_j)/p_g(y)))^2 ], truncated at y_max.
VarianceResult clt_variance_detail(const MixingWeights& g, Count y, Count y_max);
double clt_variance(const MixingWeights& g, Count y, Count y_max);

inline constexpr std::size_t kVMatrixMaxGrid = 200;

/// V_{ij} = sum_z g(i|z) g(j|z) p_g(z) - g_i g_j over the first d - 1 atoms.
/// Throws ConfigError for d > kVMatrixMaxGrid or d < 2.
Eigen::MatrixXd vmatrix(const MixingWeights& g, Count y_max);

/// Gradient of theta_hat_g(y) in the free coordinates g_1..g_{d-1}, with
/// g_d = 1 - sum of the others.
Eigen::VectorXd estimate_gradient(const MixingWeights& g, Count y);

/// grad' V grad: the delta-method route to the same variance as clt_variance.
double delta_method_variance(const MixingWeights& g, Count y, Count y_max);

/// Standard normal quantile, |error| < 1e-12 on (0, 1).
double normal_quantile(double p);

struct EstimateReport {
  Count y = 0;
  double theta_hat = 0.0;
  double variance = 0.0;
  double b_n = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double level = 0.0;
  double z = 0.0;
  double tail_mass = 0.0;
};

/// theta_hat +- z_{(1+level)/2} sqrt(W / b_n) at the current state.
/// level must lie in [0, 1); n >= 1; the schedule must be a power schedule.
EstimateReport credible_interval(const NewtonState& state, Count y, double level,
                                 std::optional<Count> y_max = std::nullopt);

std::string estimate_csv_header();
std::string to_csv_row(const EstimateReport& r);

}  // namespace qbeb
