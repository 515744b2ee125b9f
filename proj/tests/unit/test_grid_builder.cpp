#include <doctest.h>

#include <cmath>

#include "../support/oracles.hpp"
#include "qbeb/errors.hpp"
#include "qbeb/grid_builder.hpp"

using namespace qbeb;

namespace {

// Direct transcription of the two conditions, scanned from 1.
std::uint64_t scan_oracle(double eta, int k, double m) {
  for (std::uint64_t n = 1;; ++n) {
    const double nd = static_cast<double>(n);
    if (nd > 1.0 / eta && std::pow(nd, 1 - k) * std::log(nd * eta) * m <= std::pow(eta, k)) return n;
  }
}

}  // namespace

TEST_CASE("grid size: smallest admissible n") {
  const GridSpec spec{0.1, 2, 10.0};
  const auto n = kl_grid_size(spec);
  CHECK(n == scan_oracle(0.1, 2, 10.0));
  CHECK(grid_size_condition(spec, n));
  CHECK_FALSE(grid_size_condition(spec, n - 1));
}

TEST_CASE("grid size: vanishing moment leaves only n > 1/eta") {
  CHECK(kl_grid_size(GridSpec{1.0, 2, 1e-300}) == 2);
  CHECK(kl_grid_size(GridSpec{0.3, 2, 1e-300}) == 4);
  CHECK(kl_grid_size(GridSpec{0.5, 2, 1e-300}) == 3);
}

TEST_CASE("grid size grows with the moment bound and shrinks with eta") {
  std::uint64_t prev = 0;
  for (double m : {5.0, 10.0, 20.0, 40.0}) {
    const auto n = kl_grid_size(GridSpec{0.025, 2, m});
    CHECK(n > prev);
    prev = n;
  }
  CHECK(kl_grid_size(GridSpec{0.05, 2, 10.0}) < kl_grid_size(GridSpec{0.025, 2, 10.0}));
}

TEST_CASE("grid size agrees with a plain scan from 1") {
  for (double eta : {0.5, 0.1, 0.025})
    for (int k : {2, 3})
      for (double m : {0.5, 4.0, 30.4}) {
        CAPTURE(eta);
        CAPTURE(k);
        CAPTURE(m);
        CHECK(kl_grid_size(GridSpec{eta, k, m}) == scan_oracle(eta, k, m));
      }
}

TEST_CASE("grid size for a second moment near 30 is in the range reported for eta = 0.025") {
  // m_2 = 30.4 puts d_eta next to 454,169.
  const auto n = kl_grid_size(GridSpec{0.025, 2, 30.4});
  CHECK(n > 440'000);
  CHECK(n < 470'000);
}

TEST_CASE("grid spec validation and infeasibility") {
  CHECK_THROWS_AS(kl_grid_size(GridSpec{0.0, 2, 1.0}), ConfigError);
  CHECK_THROWS_AS(kl_grid_size(GridSpec{0.1, 1, 1.0}), ConfigError);
  CHECK_THROWS_AS(kl_grid_size(GridSpec{0.1, 2, 0.0}), ConfigError);
  CHECK_THROWS_AS(kl_grid_size(GridSpec{0.1, 2, 1.0, 1}), ConfigError);
  CHECK_THROWS_AS(kl_grid_size(GridSpec{1e-6, 2, 1e6}), SpecInfeasible);
}

TEST_CASE("equispaced grid construction") {
  const auto g = build_equispaced_grid(GridSpec{0.5, 2, 1e-300});
  REQUIRE(g.size() == 3);
  CHECK(g[0] == 0.5);
  CHECK(g[1] == 1.0);
  CHECK(g[2] == 1.5);

  const GridSpec spec{0.1, 2, 10.0};
  const auto full = build_equispaced_grid(spec);
  CHECK(full.size() == kl_grid_size(spec));
  for (std::size_t i = 1; i < full.size(); ++i) CHECK(std::abs(full[i] - full[i - 1] - 0.1) < 1e-12);

  const GridSpec capped{0.025, 2, 10.8, 10'000};
  const auto c = build_equispaced_grid(capped);
  CHECK(c.size() == 10'000);
  CHECK(c.front() == 0.025);
  CHECK(c.back() == doctest::Approx(0.025 * static_cast<double>(kl_grid_size(capped))));
  const double h = c.spacing();
  for (std::size_t i = 1; i < c.size(); ++i) CHECK(std::abs(c[i] - c[i - 1] - h) < 1e-9 * h);
}

TEST_CASE("empirical moment") {
  std::vector<Count> ys{0, 1, 2, 3};
  CHECK(empirical_moment(ys, 2) == doctest::Approx(3.5));
  CHECK_THROWS_AS(empirical_moment(std::vector<Count>{}, 2), ConfigError);
}

TEST_CASE("binned discretization: interval membership") {
  auto grid = make_grid({1.0, 2.0});
  const auto d = binned_discretization(PriorSpec(AtomsPrior{{1.5}, {1.0}}), grid);
  CHECK(d.weights[0] == 0.0);
  CHECK(d.weights[1] == 1.0);
}

TEST_CASE("binned discretization: uniform bins") {
  auto grid = std::make_shared<const Grid>(Grid::equispaced(0.5, 3.0, 6));
  const auto d = binned_discretization(PriorSpec(UniformPrior{0.0, 3.0}), grid);
  for (std::size_t i = 0; i < 6; ++i) CHECK(d.weights[i] == doctest::Approx(1.0 / 6).epsilon(1e-12));
}

TEST_CASE("binned discretization: Weibull bins match quadrature of the density") {
  const GridSpec spec{0.05, 2, 10.8};
  auto grid = std::make_shared<const Grid>(build_equispaced_grid(spec));
  const auto d = binned_discretization(PriorSpec(WeibullPrior{5.0, 3.0}), grid);
  double sum = 0;
  for (std::size_t i = 0; i < grid->size(); ++i) {
    sum += d.weights[i];
    CHECK(d.weights[i] >= 0.0);
    if ((*grid)[i] > 8.0) continue;
    const double ref = oracle::weibull_mass((*grid)[i] - 0.05, (*grid)[i], 5.0, 3.0);
    CHECK(std::abs(d.weights[i] - ref) <= 1e-10);
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("binned discretization: atom at zero goes to the first point") {
  auto grid = make_grid({1.0, 2.0});
  const auto d = binned_discretization(PriorSpec(UniformPrior{0.0, 2.0}), grid);
  CHECK_FALSE(d.mass_at_zero);
  CHECK(d.weights[0] == doctest::Approx(0.5));
}

TEST_CASE("KL gap") {
  SUBCASE("zero for an on-grid prior") {
    auto grid = make_grid({1.0, 2.0, 3.0});
    const MixingWeights g(grid, {0.2, 0.5, 0.3});
    CHECK(std::abs(kl_discretization_gap(PriorSpec::from_weights(g), g, 40)) < 1e-14);
  }
  SUBCASE("Weibull binned at eta = 0.1 stays below 2 eta") {
    const PriorSpec prior(WeibullPrior{5.0, 3.0});
    auto grid = std::make_shared<const Grid>(build_equispaced_grid(GridSpec{0.1, 2, prior.marginal_second_moment()}));
    const auto d = binned_discretization(prior, grid);
    const double kl = kl_discretization_gap(prior, d.weights, 60);
    CHECK(kl >= -1e-12);
    CHECK(kl < 0.2);
  }
  SUBCASE("asymmetric") {
    auto grid = make_grid({1.0, 4.0});
    const MixingWeights a(grid, {0.9, 0.1}), b(grid, {0.3, 0.7});
    const double ab = kl_discretization_gap(PriorSpec::from_weights(a), b, 60);
    const double ba = kl_discretization_gap(PriorSpec::from_weights(b), a, 60);
    CHECK(std::abs(ab - ba) > 1e-3);
  }
  SUBCASE("large when the mixture misses the support") {
    const auto g = MixingWeights::point_mass(make_grid({1e-300}), 0);
    CHECK(kl_discretization_gap(PriorSpec(AtomsPrior{{1.0}, {1.0}}), g, 5) > 100.0);
  }
}
