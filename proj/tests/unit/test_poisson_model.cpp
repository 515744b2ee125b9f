#include <doctest.h>

#include <cmath>
#include <random>
#include <thread>

#include "../support/oracles.hpp"
#include "qbeb/errors.hpp"
#include "qbeb/poisson_model.hpp"

using namespace qbeb;

namespace {

GridPtr grid_of(std::vector<double> pts) { return make_grid(std::move(pts)); }

}  // namespace

TEST_CASE("log kernel trivial values") {
  CHECK(log_poisson_kernel(0, 1.0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(log_poisson_kernel(1, 1.0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK_THROWS_AS(log_poisson_kernel(3, 0.0), DomainError);
  CHECK_THROWS_AS(log_poisson_kernel(3, -1.0), DomainError);
}

TEST_CASE("log kernel against 50-digit arithmetic") {
  for (auto [y, theta] : std::vector<std::pair<Count, double>>{{50, 3.0}, {0, 1e-3}, {7, 11354.2}, {400, 397.5}}) {
    const double ref = static_cast<double>(oracle::log_kernel_big(y, theta));
    CHECK(log_poisson_kernel(y, theta) == doctest::Approx(ref).epsilon(1e-13));
  }
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(Grid(std::vector<double>{}), ConfigError);
  CHECK_THROWS_AS(Grid({1.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(Grid({2.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(Grid({0.0, 1.0}), ConfigError);
  const auto g = Grid::equispaced(0.5, 3.0, 6);
  CHECK(g.size() == 6);
  CHECK(g.is_equispaced());
  CHECK(g.spacing() == doctest::Approx(0.5));
}

TEST_CASE("mixing weights validation") {
  auto grid = grid_of({1.0, 2.0});
  CHECK_THROWS_AS(MixingWeights(grid, {0.5, 0.6}), ConfigError);
  CHECK_THROWS_AS(MixingWeights(grid, {1.5, -0.5}), ConfigError);
  CHECK_THROWS_AS(MixingWeights(grid, {1.0}), ConfigError);
  const MixingWeights ok(grid, {0.25, 0.75});
  CHECK(ok[1] == 0.75);
}

TEST_CASE("mixture pmf") {
  auto point = MixingWeights::point_mass(grid_of({2.0}), 0);
  CHECK(mixture_pmf(point, 0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));

  auto uni = MixingWeights::uniform(grid_of({1.0, 2.0}));
  CHECK(mixture_pmf(uni, 1) == doctest::Approx((std::exp(-1.0) + 2 * std::exp(-2.0)) / 2).epsilon(1e-15));

  std::mt19937_64 rng(11);
  const auto pts = oracle::random_grid(rng, 50, 0.1, 20.0);
  const auto w = oracle::random_simplex(rng, 50);
  const MixingWeights g(grid_of(pts), w);
  const double direct = static_cast<double>(oracle::mixture_direct(pts, w, 7));
  CHECK(std::abs(mixture_pmf(g, 7) - direct) <= 1e-10 * direct);
}

TEST_CASE("zero-weight atoms are skipped, not pruned") {
  auto grid = grid_of({1.0, 5000.0});
  const MixingWeights g(grid, {1.0, 0.0});
  CHECK(g.size() == 2);
  CHECK(mixture_pmf(g, 0) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("posterior weights") {
  auto point = MixingWeights::point_mass(grid_of({1.0, 2.0, 3.0}), 1);
  const auto pp = posterior_weights(point, 9);
  CHECK(pp[0] == 0.0);
  CHECK(pp[1] == 1.0);
  CHECK(pp[2] == 0.0);

  auto uni = MixingWeights::uniform(grid_of({1.0, 3.0}));
  const auto post = posterior_weights(uni, 0);
  CHECK(post[0] == doctest::Approx(0.8808).epsilon(1e-4));
  CHECK(post[1] == doctest::Approx(0.1192).epsilon(1e-3));

  std::mt19937_64 rng(5);
  const auto pts = oracle::random_grid(rng, 100, 0.05, 30.0);
  const auto w = oracle::random_simplex(rng, 100);
  const auto got = posterior_weights(MixingWeights(grid_of(pts), w), 4);
  const auto ref = oracle::posterior_direct(pts, w, 4);
  double sum = 0;
  for (std::size_t j = 0; j < 100; ++j) {
    CHECK(std::abs(got[j] - ref[j]) <= 1e-12);
    sum += got[j];
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("posterior weights reject an unexplainable count") {
  auto g = MixingWeights::uniform(grid_of({1e-3}));
  CHECK_THROWS_AS(posterior_weights(g, 100000), DegenerateLikelihood);
}

TEST_CASE("posterior mean") {
  auto point = MixingWeights::point_mass(grid_of({1.0, 2.5, 4.0}), 1);
  CHECK(posterior_mean(point, 9) == doctest::Approx(2.5).epsilon(1e-15));
  auto uni = MixingWeights::uniform(grid_of({1.0, 3.0}));
  CHECK(posterior_mean(uni, 0) == doctest::Approx(1.2384).epsilon(1e-4));
}

TEST_CASE("posterior mean ratio identity and bounds") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const auto pts = oracle::random_grid(rng, 30, 0.1, 40.0);
    const MixingWeights g(grid_of(pts), oracle::random_simplex(rng, 30));
    for (Count y = 0; y <= 100; ++y) {
      const double pm = posterior_mean(g, y);
      const double ratio = static_cast<double>(y + 1) * std::exp(log_mixture_pmf(g, y + 1) - log_mixture_pmf(g, y));
      CHECK(std::abs(pm - ratio) <= 1e-10 * ratio);
      CHECK(pm >= pts.front());
      CHECK(pm <= pts.back());
    }
  }
}

TEST_CASE("marginal sums to one within the default truncation") {
  std::mt19937_64 rng(8);
  const auto pts = oracle::random_grid(rng, 20, 0.5, 60.0);
  const MixingWeights g(grid_of(pts), oracle::random_simplex(rng, 20));
  const Count y_max = default_y_max(g.grid());
  double s = 0;
  for (Count y = 0; y <= y_max; ++y) s += mixture_pmf(g, y);
  CHECK(1.0 - s < 1e-8);
}

TEST_CASE("kernel cache") {
  auto grid = grid_of({0.5, 2.0, 9.0});
  KernelCache cache(grid);
  const auto c5 = cache.column(5);
  const std::vector<double> first(c5.begin(), c5.end());
  for (std::size_t j = 0; j < 3; ++j) {
    const double ref = static_cast<double>(oracle::kernel_direct(5, (*grid)[j]));
    CHECK(std::abs(std::exp(c5[j]) - ref) <= 1e-12 * ref);
  }
  cache.column(40);
  cache.column(0);
  const auto again = cache.column(5);
  CHECK(std::vector<double>(again.begin(), again.end()) == first);
  CHECK(cache.columns() == 3);

  // Concurrent readers extending the cache see consistent columns.
  std::vector<std::thread> pool;
  std::vector<int> bad(4, 0);
  for (int t = 0; t < 4; ++t)
    pool.emplace_back([&, t] {
      for (Count y = 0; y < 200; ++y) {
        const auto col = cache.column(y);
        if (col[1] != log_poisson_kernel(y, 2.0)) ++bad[t];
      }
    });
  for (auto& th : pool) th.join();
  for (int b : bad) CHECK(b == 0);
}

TEST_CASE("count histogram") {
  CountHistogram h(std::vector<Count>{0, 0, 1, 5});
  CHECK(h.total() == 4);
  CHECK(h.count(0) == 2);
  CHECK(h.count(3) == 0);
  CHECK(h.max_y() == 5);
}
