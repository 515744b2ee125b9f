#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace qbeb {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log sum_i exp(x_i); returns -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> x) {
  double m = kNegInf;
  for (double v : x) m = std::max(m, v);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

/// log sum_j exp(a_j + b_j), terms with a_j == -inf skipped.
inline double log_sum_exp_pairs(std::span<const double> a, std::span<const double> b) {
  double m = kNegInf;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j] == kNegInf) continue;
    m = std::max(m, a[j] + b[j]);
  }
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j] == kNegInf) continue;
    s += std::exp(a[j] + b[j] - m);
  }
  return m + std::log(s);
}

/// A count is treated as impossible under g when p_g(y) is below the smallest
/// normal double, even though the log-space update could still proceed.
inline bool degenerate_log_mass(double log_p) {
  return !(log_p >= std::log(std::numeric_limits<double>::min()));
}

inline double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

}  // namespace qbeb
