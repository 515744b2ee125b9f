#pragma once

// Mixing distributions used to generate synthetic compound data and as
// oracles for discretization and regret checks.

#include <random>
#include <string>
#include <variant>
#include <vector>

#include "qbeb/poisson_model.hpp"

namespace qbeb {

struct WeibullPrior {
  double shape;
  double scale;
};

struct UniformPrior {
  double lo;
  double hi;
};

/// N(0, sigma^2) truncated to (0, inf).
struct HalfGaussianPrior {
  double sigma = 1.0;
};

/// Finite discrete prior; atoms strictly positive and increasing.
struct AtomsPrior {
  std::vector<double> atoms;
  std::vector<double> weights;
};

/// Gamma(shape, rate).
struct GammaPrior {
  double shape;
  double rate;
};

class PriorSpec {
 public:
  using Family = std::variant<WeibullPrior, UniformPrior, HalfGaussianPrior, AtomsPrior, GammaPrior>;

  /// Validates parameters; throws ConfigError.
  explicit PriorSpec(Family family);

  /// Parses "weibull:5,3", "uniform:0,3", "half-gaussian[:sigma]",
  /// "gamma:shape,rate", "atoms:t1,t2,...@w1,w2,..." (weights optional,
  /// uniform when omitted).
  static PriorSpec parse(const std::string& text);

  /// The distribution placing weight g_j on theta_j.
  static PriorSpec from_weights(const MixingWeights& g);

  const Family& family() const noexcept { return family_; }
  std::string name() const;
  bool is_discrete() const noexcept { return std::holds_alternative<AtomsPrior>(family_); }

  double cdf(double theta) const;
  /// Density; throws for the discrete family.
  double pdf(double theta) const;
  double sample(std::mt19937_64& rng) const;

  double mean() const;
  double second_moment() const;
  /// E[Y^2] = E[theta] + E[theta^2] for Y | theta ~ Poisson(theta).
  double marginal_second_moment() const { return mean() + second_moment(); }

  /// [lower, upper] carrying all but ~1e-16 of the mass.
  std::pair<double, double> effective_support() const;

  /// p_G(y) for y = 0..y_max. Exact for atoms and gamma; composite
  /// Gauss-Legendre quadrature with `nodes` points otherwise.
  std::vector<double> marginal_pmf(Count y_max, std::size_t nodes = 10'000) const;

 private:
  Family family_;
};

}  // namespace qbeb
