#include "qbeb/inference.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "qbeb/detail/newton_step.hpp"
#include "qbeb/errors.hpp"
#include "qbeb/numeric.hpp"

namespace qbeb {

namespace {

std::vector<double> log_weights(const MixingWeights& g) {
  std::vector<double> lw(g.size());
  for (std::size_t j = 0; j < lw.size(); ++j) lw[j] = safe_log(g[j]);
  return lw;
}

struct RatioTerms {
  double theta_hat;
  double log_p0;
  double log_p1;
  // k(y+1|j)/p(y+1) - k(y|j)/p(y)
  std::vector<double> r;
};

RatioTerms ratio_terms(const MixingWeights& g, Count y) {
  const std::size_t d = g.size();
  std::vector<double> k0(d), k1(d);
  log_kernel_column(g.grid(), y, k0);
  log_kernel_column(g.grid(), y + 1, k1);
  const auto lw = log_weights(g);
  const double lp0 = log_sum_exp_pairs(lw, k0);
  const double lp1 = log_sum_exp_pairs(lw, k1);
  if (!std::isfinite(lp0) || !std::isfinite(lp1))
    throw DegenerateLikelihood(y, 0, "p_g(y) or p_g(y+1) underflows at y=" + std::to_string(y));
  RatioTerms t{static_cast<double>(y + 1) * std::exp(lp1 - lp0), lp0, lp1, std::vector<double>(d)};
  for (std::size_t j = 0; j < d; ++j) t.r[j] = std::exp(k1[j] - lp1) - std::exp(k0[j] - lp0);
  return t;
}

}  // namespace

double qb_estimate(const MixingWeights& g, Count y) {
  const auto lw = log_weights(g);
  std::vector<double> col(g.size());
  log_kernel_column(g.grid(), y, col);
  const double lp0 = log_sum_exp_pairs(lw, col);
  log_kernel_column(g.grid(), y + 1, col);
  const double lp1 = log_sum_exp_pairs(lw, col);
  if (!std::isfinite(lp0) || !std::isfinite(lp1))
    throw DegenerateLikelihood(y, 0, "p_g(y) or p_g(y+1) underflows at y=" + std::to_string(y));
  return static_cast<double>(y + 1) * std::exp(lp1 - lp0);
}

double squared_rate_tail(const LearningRate& rate, std::uint64_t n) {
  const double s = 2.0 * rate.gamma();
  const double a = rate.alpha();
  constexpr std::uint64_t kDirect = 2000;
  const double K = a + static_cast<double>(n + kDirect);
  // Euler-Maclaurin for sum_{k >= n + kDirect} (a + k)^{-s}.
  const double f = std::pow(K, -s);
  const double f1 = -s * f / K;
  const double f3 = -s * (s + 1) * (s + 2) * f / (K * K * K);
  long double tail = std::pow(K, 1.0 - s) / (s - 1.0) + 0.5 * f - f1 / 12.0 + f3 / 720.0;
  for (std::uint64_t i = kDirect; i-- > 0;)
    tail += std::pow(a + static_cast<double>(n + i), -s);
  return static_cast<double>(tail);
}

double tail_sum_bn(const LearningRate& rate, std::uint64_t n) {
  if (n == 0) throw DomainError("b_n is defined for n >= 1");
  return 1.0 / squared_rate_tail(rate, n);
}

double tail_sum_bn_asymptotic(const LearningRate& rate, std::uint64_t n) {
  const double e = 2.0 * rate.gamma() - 1.0;
  return e * std::pow(rate.alpha() + static_cast<double>(n), e);
}

ScheduleCertificate validate_power_schedule(const LearningRate& rate, std::uint64_t terms) {
  ScheduleCertificate c;
  c.terms = terms;
  c.non_increasing = true;
  for (std::uint64_t n = 1; n < std::min<std::uint64_t>(terms, 10'000); ++n)
    if (rate(n + 1) > rate(n)) c.non_increasing = false;
  // S_n = S_{n+1} + alpha_n^2, run backwards from an Euler-Maclaurin start.
  long double tail = squared_rate_tail(rate, terms + 1);
  long double partial = 0.0;
  for (std::uint64_t n = terms; n >= 1; --n) {
    const double a2 = rate(n) * rate(n);
    tail += a2;
    const long double ratio = a2 / tail;
    partial += ratio * ratio;
  }
  c.ratio_series_partial = static_cast<double>(partial);
  c.ratio_series_summable = rate.gamma() > 0.5 && rate.gamma() <= 1.0 && std::isfinite(c.ratio_series_partial);
  return c;
}

VarianceResult clt_variance_detail(const MixingWeights& g, Count y, Count y_max) {
  const auto t = ratio_terms(g, y);
  const std::size_t d = g.size();
  const auto w = g.weights();
  std::vector<double> col(d), post(d);
  double acc = 0.0, mass = 0.0;
  for (Count z = 0; z <= y_max; ++z) {
    log_kernel_column(g.grid(), z, col);
    const double lp = detail::posterior_into(w, col, post);
    if (!std::isfinite(lp)) continue;
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += post[j] * t.r[j];
    const double p = std::exp(lp);
    acc += p * s * s;
    mass += p;
  }
  return {t.theta_hat * t.theta_hat * acc, std::max(0.0, 1.0 - mass)};
}

double clt_variance(const MixingWeights& g, Count y, Count y_max) {
  return clt_variance_detail(g, y, y_max).value;
}

Eigen::MatrixXd vmatrix(const MixingWeights& g, Count y_max) {
  const std::size_t d = g.size();
  if (d > kVMatrixMaxGrid)
    throw ConfigError("vmatrix is limited to d <= " + std::to_string(kVMatrixMaxGrid));
  if (d < 2) throw ConfigError("vmatrix needs at least two atoms");
  const std::size_t m = d - 1;
  const auto w = g.weights();
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  std::vector<double> col(d), post(d);
  for (Count z = 0; z <= y_max; ++z) {
    log_kernel_column(g.grid(), z, col);
    const double lp = detail::posterior_into(w, col, post);
    if (!std::isfinite(lp)) continue;
    const double p = std::exp(lp);
    Eigen::Map<const Eigen::VectorXd> u(post.data(), static_cast<Eigen::Index>(m));
    V.noalias() += p * u * u.transpose();
  }
  Eigen::Map<const Eigen::VectorXd> gv(w.data(), static_cast<Eigen::Index>(m));
  V.noalias() -= gv * gv.transpose();
  return 0.5 * (V + V.transpose());
}

Eigen::VectorXd estimate_gradient(const MixingWeights& g, Count y) {
  const auto t = ratio_terms(g, y);
  const std::size_t m = g.size() - 1;
  Eigen::VectorXd grad(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) grad[static_cast<Eigen::Index>(i)] = t.theta_hat * (t.r[i] - t.r[m]);
  return grad;
}

double delta_method_variance(const MixingWeights& g, Count y, Count y_max) {
  const Eigen::MatrixXd V = vmatrix(g, y_max);
  const Eigen::VectorXd grad = estimate_gradient(g, y);
  return grad.dot(V * grad);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal quantile needs 0 < p < 1");
  if (p == 0.5) return 0.0;
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double e[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((e[0] * q + e[1]) * q + e[2]) * q + e[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((e[0] * q + e[1]) * q + e[2]) * q + e[3]) * q + 1.0);
  }
  // Two Halley steps against the exact CDF.
  for (int i = 0; i < 2; ++i) {
    const double err = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = err * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

EstimateReport credible_interval(const NewtonState& state, Count y, double level,
                                 std::optional<Count> y_max) {
  if (!(level >= 0.0 && level < 1.0)) throw DomainError("credible level must lie in [0, 1)");
  if (state.n() == 0) throw DomainError("credible interval needs at least one observation");
  const auto& power = state.rate().power();
  if (!power) throw DomainError("credible interval needs a power learning-rate schedule");

  const auto g = state.snapshot();
  EstimateReport r;
  r.y = y;
  r.level = level;
  r.theta_hat = qb_estimate(g, y);
  const auto var = clt_variance_detail(g, y, y_max.value_or(default_y_max(g.grid())));
  r.variance = var.value;
  r.tail_mass = var.tail_mass;
  r.b_n = tail_sum_bn(*power, state.n());
  r.z = level == 0.0 ? 0.0 : normal_quantile(0.5 * (1.0 + level));
  const double half = r.z * std::sqrt(r.variance / r.b_n);
  r.ci_low = r.theta_hat - half;
  r.ci_high = r.theta_hat + half;
  return r;
}

std::string estimate_csv_header() { return "y,theta_hat,variance,b_n,ci_low,ci_high,level"; }

std::string to_csv_row(const EstimateReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << r.y << ',' << r.theta_hat << ',' << r.variance << ',' << r.b_n << ',' << r.ci_low << ','
     << r.ci_high << ',' << r.level;
  return os.str();
}

}  // namespace qbeb
