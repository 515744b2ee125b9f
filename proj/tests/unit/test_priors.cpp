#include <doctest.h>

#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "qbeb/errors.hpp"
#include "qbeb/priors.hpp"

using namespace qbeb;

TEST_CASE("parsing") {
  CHECK(PriorSpec::parse("weibull:5,3").name() == PriorSpec(WeibullPrior{5, 3}).name());
  CHECK(PriorSpec::parse("half-gaussian").mean() == doctest::Approx(std::sqrt(2.0 / M_PI)));
  CHECK(PriorSpec::parse("atoms:1,2@0.25,0.75").mean() == doctest::Approx(1.75));
  CHECK(PriorSpec::parse("atoms:1,3").mean() == doctest::Approx(2.0));
  CHECK_THROWS_AS(PriorSpec::parse("weibull:5"), ConfigError);
  CHECK_THROWS_AS(PriorSpec::parse("cauchy:1"), ConfigError);
  CHECK_THROWS_AS(PriorSpec(UniformPrior{3, 1}), ConfigError);
  CHECK_THROWS_AS(PriorSpec(AtomsPrior{{2, 1}, {0.5, 0.5}}), ConfigError);
}

TEST_CASE("cdf and moments") {
  const PriorSpec w(WeibullPrior{5, 3});
  CHECK(w.cdf(0.0) == 0.0);
  CHECK(w.cdf(3.0) == doctest::Approx(1 - std::exp(-1.0)));
  CHECK(w.mean() == doctest::Approx(3 * std::tgamma(1.2)));
  CHECK(w.second_moment() == doctest::Approx(9 * std::tgamma(1.4)));
  const PriorSpec h(HalfGaussianPrior{2.0});
  CHECK(h.cdf(0.0) == 0.0);
  CHECK(h.cdf(2.0) == doctest::Approx(std::erf(1 / std::sqrt(2.0))));
  const PriorSpec u(UniformPrior{0, 3});
  CHECK(u.marginal_second_moment() == doctest::Approx(1.5 + 3.0));
  double prev = 0;
  for (double t = 0.1; t < 10; t += 0.1) {
    CHECK(w.cdf(t) >= prev);
    prev = w.cdf(t);
  }
}

TEST_CASE("marginal pmf against adaptive quadrature") {
  const PriorSpec w(WeibullPrior{5, 3});
  const auto p = w.marginal_pmf(20);
  const auto ref = oracle::marginal_by_quadrature([](double t) { return oracle::weibull_pdf(t, 5, 3); }, 0.0, 12.0, 20);
  for (Count y = 0; y <= 20; ++y) CHECK(std::abs(p[y] - ref[y]) < 1e-10);

  const PriorSpec g(GammaPrior{2.0, 1.0});
  const auto pg = g.marginal_pmf(10);
  // Negative binomial with r = 2, success probability 1/2.
  for (Count y = 0; y <= 10; ++y) CHECK(pg[y] == doctest::Approx((y + 1) * std::pow(0.5, y + 2)).epsilon(1e-12));
}

TEST_CASE("sampling moments") {
  std::mt19937_64 rng(1);
  const PriorSpec h(HalfGaussianPrior{1.0});
  double s = 0;
  const int n = 200'000;
  for (int i = 0; i < n; ++i) {
    const double x = h.sample(rng);
    REQUIRE(x >= 0.0);
    s += x;
  }
  CHECK(std::abs(s / n - h.mean()) < 4 * 0.6 / std::sqrt(n));
}
