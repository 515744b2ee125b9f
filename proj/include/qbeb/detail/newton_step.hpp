#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "qbeb/numeric.hpp"

namespace qbeb::detail {

/// Writes g(theta_j | y) into `post` given log k(y | theta_j). Returns
/// log p_g(y); -inf when the likelihood vanishes even in log space, in which
/// case `post` is unspecified.
inline double posterior_into(std::span<const double> g, std::span<const double> log_kernel,
                             std::span<double> post) {
  const std::size_t d = g.size();
  double cmax = kNegInf;
  for (std::size_t j = 0; j < d; ++j)
    if (g[j] > 0.0 && log_kernel[j] > cmax) cmax = log_kernel[j];
  if (cmax == kNegInf) return kNegInf;

  double sum = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    post[j] = g[j] > 0.0 ? g[j] * std::exp(log_kernel[j] - cmax) : 0.0;
    sum += post[j];
  }
  if (sum > 1e-280) {
    for (std::size_t j = 0; j < d; ++j) post[j] /= sum;
    return cmax + std::log(sum);
  }

  // Mass sits where the kernel is tiny relative to its maximum: redo in log space.
  double lmax = kNegInf;
  for (std::size_t j = 0; j < d; ++j) {
    post[j] = g[j] > 0.0 ? std::log(g[j]) + log_kernel[j] : kNegInf;
    lmax = std::max(lmax, post[j]);
  }
  if (lmax == kNegInf) return kNegInf;
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) s += post[j] == kNegInf ? 0.0 : std::exp(post[j] - lmax);
  const double lp = lmax + std::log(s);
  for (std::size_t j = 0; j < d; ++j) post[j] = post[j] == kNegInf ? 0.0 : std::exp(post[j] - lp);
  return lp;
}

/// g <- (1 - a) g + a post, then renormalized to sum exactly to 1 in
/// floating point as far as one division allows.
inline void blend_into(std::span<double> g, std::span<const double> post, double a) {
  const double keep = 1.0 - a;
  double sum = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    g[j] = keep * g[j] + a * post[j];
    sum += g[j];
  }
  for (double& w : g) w /= sum;
}

}  // namespace qbeb::detail
