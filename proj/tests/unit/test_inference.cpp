#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "qbeb/errors.hpp"
#include "qbeb/inference.hpp"

using namespace qbeb;

namespace {

// sum_{k >= n} (alpha + k)^{-2 gamma} by brute force to 2e6 terms plus the
// integral remainder.
double tail_oracle(double alpha, double gamma, std::uint64_t n) {
  long double s = 0;
  const std::uint64_t stop = n + 2'000'000;
  for (std::uint64_t k = stop - 1; k >= n; --k) s += std::pow(static_cast<long double>(alpha + k), -2.0L * gamma);
  s += std::pow(static_cast<long double>(alpha + stop) - 0.5L, 1.0L - 2.0L * gamma) / (2.0L * gamma - 1.0L);
  return static_cast<double>(s);
}

MixingWeights random_weights(std::mt19937_64& rng, std::size_t d, double lo, double hi, double floor = 0.0) {
  return MixingWeights(make_grid(oracle::random_grid(rng, d, lo, hi)), oracle::random_simplex(rng, d, floor));
}

}  // namespace

TEST_CASE("qb estimate") {
  auto point = MixingWeights::point_mass(make_grid({1.0, 2.5, 4.0}), 1);
  for (Count y = 0; y < 20; ++y) CHECK(qb_estimate(point, y) == doctest::Approx(2.5).epsilon(1e-14));

  std::mt19937_64 rng(12);
  for (std::size_t d : {3, 50, 1000}) {
    for (int rep = 0; rep < 5; ++rep) {
      const auto g = random_weights(rng, d, 0.05, 40.0);
      for (Count y = 0; y <= 50; ++y) {
        const auto pts = g.grid().points();
        const auto post = oracle::posterior_direct({pts.begin(), pts.end()}, {g.weights().begin(), g.weights().end()}, y);
        long double pm = 0;
        for (std::size_t j = 0; j < d; ++j) pm += static_cast<long double>(post[j]) * pts[j];
        const double est = qb_estimate(g, y);
        CHECK(std::abs(est - posterior_mean(g, y)) <= 1e-10 * est);
        CHECK(std::abs(est - static_cast<double>(pm)) <= 1e-10 * est);
      }
    }
  }
}

TEST_CASE("b_n") {
  SUBCASE("gamma = 1: 1/(n+1) < tail < 1/n") {
    const LearningRate r(1.0, 1.0);
    for (std::uint64_t n : {1ull, 10ull, 1000ull, 100000ull}) {
      const double bn = tail_sum_bn(r, n);
      CHECK(bn > static_cast<double>(n));
      CHECK(bn < static_cast<double>(n) + 1.0);
    }
  }
  SUBCASE("direct tail matches a brute-force sum") {
    for (double gamma : {0.6, 0.75, 0.99}) {
      const LearningRate r(1.0, gamma);
      for (std::uint64_t n : {1ull, 100ull, 5000ull}) {
        const double ref = tail_oracle(1.0, gamma, n);
        CHECK(squared_rate_tail(r, n) == doctest::Approx(ref).epsilon(1e-9));
        CHECK(tail_sum_bn(r, n) * squared_rate_tail(r, n) == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
  SUBCASE("close to the asymptotic form for n >= 100") {
    for (double gamma : {0.6, 0.75, 0.9})
      for (std::uint64_t n : {100ull, 1000ull, 10000ull}) {
        const LearningRate r(1.0, gamma);
        const double ratio = tail_sum_bn(r, n) / tail_sum_bn_asymptotic(r, n);
        CHECK(std::abs(ratio - 1.0) < 0.02);
      }
  }
  SUBCASE("strictly increasing") {
    const LearningRate r(1.0, 0.75);
    double prev = 0;
    for (std::uint64_t n = 1; n < 300; ++n) {
      const double bn = tail_sum_bn(r, n);
      CHECK(bn > prev);
      prev = bn;
    }
    CHECK_THROWS_AS(tail_sum_bn(r, 0), DomainError);
  }
}

TEST_CASE("schedule certificate") {
  for (double gamma : {0.51, 0.75, 1.0}) {
    const auto c = validate_power_schedule(LearningRate(1.0, gamma), 10'000);
    CHECK(c.non_increasing);
    CHECK(c.ratio_series_summable);
    CHECK(std::isfinite(c.ratio_series_partial));
    CHECK(c.terms == 10'000);
  }
}

TEST_CASE("clt variance") {
  SUBCASE("point mass gives zero") {
    auto g = MixingWeights::point_mass(make_grid({1.0, 2.0, 3.0}), 0);
    CHECK(clt_variance(g, 2, 60) == 0.0);
  }
  SUBCASE("two atoms against a double sum") {
    const double t1 = 1.0, t2 = 3.0, w1 = 0.5, w2 = 0.5;
    auto g = MixingWeights(make_grid({t1, t2}), {w1, w2});
    const Count y = 0;
    auto k = [](Count z, double t) { return static_cast<double>(oracle::kernel_direct(z, t)); };
    const double py = w1 * k(y, t1) + w2 * k(y, t2);
    const double py1 = w1 * k(y + 1, t1) + w2 * k(y + 1, t2);
    const double th = (y + 1) * py1 / py;
    long double e = 0;
    for (Count z = 0; z <= 60; ++z) {
      const double pz = w1 * k(z, t1) + w2 * k(z, t2);
      double inner = 0;
      for (auto [t, w] : {std::pair{t1, w1}, std::pair{t2, w2}})
        inner += k(z, t) * w / pz * (k(y + 1, t) / py1 - k(y, t) / py);
      e += static_cast<long double>(inner) * inner * pz;
    }
    const double ref = th * th * static_cast<double>(e);
    CHECK(std::abs(clt_variance(g, y, 60) - ref) <= 1e-9 * ref);
  }
  SUBCASE("agrees with the V-matrix sandwich") {
    std::mt19937_64 rng(33);
    for (int rep = 0; rep < 20; ++rep) {
      const std::size_t d = 2 + rng() % 49;
      const auto g = random_weights(rng, d, 0.2, 15.0, 0.05);
      const Count y = rng() % 8;
      const auto y_max = static_cast<Count>(g.grid().points().back() + 20 * std::sqrt(g.grid().points().back()));
      const double w = clt_variance(g, y, y_max);
      const double dm = delta_method_variance(g, y, y_max);
      CHECK(w >= 0.0);
      CHECK(std::abs(w - dm) <= 1e-8 * std::max(1.0, w));
    }
  }
}

TEST_CASE("V matrix") {
  SUBCASE("symmetric and positive definite for uniform d = 3") {
    auto g = MixingWeights::uniform(make_grid({1.0, 2.0, 4.0}));
    const auto v = vmatrix(g, 80);
    CHECK(v.rows() == 2);
    CHECK((v - v.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
  SUBCASE("vanishes as g approaches a point mass") {
    double prev = 1e300;
    for (double eps : {1e-1, 1e-3, 1e-6}) {
      auto g = MixingWeights(make_grid({1.0, 2.0, 4.0}), {1 - eps, eps / 2, eps / 2});
      const double norm = vmatrix(g, 80).norm();
      CHECK(norm < prev);
      prev = norm;
    }
    CHECK(prev < 1e-5);
  }
  SUBCASE("size limits") {
    CHECK_THROWS_AS(vmatrix(MixingWeights::uniform(make_grid({1.0})), 10), ConfigError);
    CHECK_THROWS_AS(vmatrix(MixingWeights::uniform(std::make_shared<const Grid>(Grid::equispaced(1, 201, 201))), 10),
                    ConfigError);
  }
}

TEST_CASE("credible interval") {
  auto grid = make_grid({1.0, 2.0, 3.0});
  SUBCASE("point mass has zero width") {
    NewtonState s(grid, LearningRate(1.0, 0.75), MixingWeights::point_mass(grid, 1));
    s.update(3);
    const auto r = credible_interval(s, 2, 0.9);
    CHECK(r.theta_hat == doctest::Approx(2.0));
    CHECK(r.ci_low == doctest::Approx(2.0));
    CHECK(r.ci_high == doctest::Approx(2.0));
  }
  SUBCASE("level zero collapses, wider levels nest") {
    NewtonState s(grid, LearningRate(1.0, 0.75));
    for (Count y : {0u, 2u, 3u, 1u, 5u}) s.update(y);
    const auto r0 = credible_interval(s, 1, 0.0);
    CHECK(r0.ci_low == r0.theta_hat);
    CHECK(r0.ci_high == r0.theta_hat);
    const auto r9 = credible_interval(s, 1, 0.9);
    const auto r99 = credible_interval(s, 1, 0.99);
    CHECK(r9.ci_low <= r9.theta_hat);
    CHECK(r9.theta_hat <= r9.ci_high);
    CHECK(r99.ci_low < r9.ci_low);
    CHECK(r99.ci_high > r9.ci_high);
    const double half = r9.z * std::sqrt(r9.variance / r9.b_n);
    CHECK(r9.ci_high - r9.theta_hat == doctest::Approx(half).epsilon(1e-12));
    CHECK(r9.b_n == doctest::Approx(tail_sum_bn(LearningRate(1.0, 0.75), 5)));
  }
  SUBCASE("preconditions") {
    NewtonState fresh(grid, LearningRate(1.0, 0.75));
    CHECK_THROWS_AS(credible_interval(fresh, 1, 0.9), DomainError);
    fresh.update(1);
    CHECK_THROWS_AS(credible_interval(fresh, 1, 1.0), DomainError);
    CHECK_THROWS_AS(credible_interval(fresh, 1, -0.1), DomainError);
  }
  SUBCASE("csv row") {
    EstimateReport r{3, 1.5, 0.25, 10.0, 1.0, 2.0, 0.9, 1.6448536269514722, 0.0};
    CHECK(estimate_csv_header() == "y,theta_hat,variance,b_n,ci_low,ci_high,level");
    CHECK(to_csv_row(r).rfind("3,1.5,0.25,10,1,2,0.9", 0) == 0);
  }
}

TEST_CASE("normal quantile") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::abs(normal_quantile(0.95) - 1.6448536269514722) < 1e-12);
  CHECK(std::abs(normal_quantile(0.975) - 1.959963984540054) < 1e-12);
  CHECK(std::abs(normal_quantile(1e-10) + 6.361340902404056) < 1e-9);
  for (double p : {0.001, 0.2, 0.7, 0.999}) CHECK(normal_quantile(p) == doctest::Approx(-normal_quantile(1 - p)).epsilon(1e-12));
}
