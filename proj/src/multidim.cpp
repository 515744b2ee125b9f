#include "qbeb/multidim.hpp"

#include <cmath>
#include <string>

#include "qbeb/detail/newton_step.hpp"
#include "qbeb/errors.hpp"
#include "qbeb/numeric.hpp"
#include "qbeb/serialization.hpp"

namespace qbeb {

ProductGrid::ProductGrid(GridPtr base, unsigned k, std::uint64_t cap) : base_(std::move(base)), k_(k) {
  if (!base_) throw ConfigError("product grid needs a base grid");
  if (k_ == 0) throw ConfigError("product grid needs k >= 1");
  const std::uint64_t d = base_->size();
  std::uint64_t D = 1;
  for (unsigned c = 0; c < k_; ++c) {
    if (D > cap / d) throw ConfigError("product grid d^k exceeds the cap of " + std::to_string(cap) + " atoms");
    D *= d;
  }
  size_ = static_cast<std::size_t>(D);
  stride_.assign(k_, 1);
  for (unsigned c = k_ - 1; c-- > 0;) stride_[c] = stride_[c + 1] * base_->size();
}

std::vector<std::size_t> ProductGrid::tuple(std::size_t i) const {
  std::vector<std::size_t> t(k_);
  for (unsigned c = 0; c < k_; ++c) t[c] = digit(i, c);
  return t;
}

std::size_t ProductGrid::index(std::span<const std::size_t> t) const {
  if (t.size() != k_) throw ConfigError("tuple length does not match k");
  std::size_t i = 0;
  for (unsigned c = 0; c < k_; ++c) {
    if (t[c] >= base_->size()) throw ConfigError("tuple entry out of range");
    i += t[c] * stride_[c];
  }
  return i;
}

// ---------------------------------------------------------------------------

MultiMixingWeights::MultiMixingWeights(ProductGridPtr grid, std::vector<double> weights, double sum_tol)
    : grid_(std::move(grid)) {
  if (!grid_) throw ConfigError("mixing weights need a grid");
  if (weights.size() != grid_->size())
    throw ConfigError("weight vector has length " + std::to_string(weights.size()) + " but the product grid has " +
                      std::to_string(grid_->size()) + " atoms");
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("weights must be finite and >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > sum_tol) throw ConfigError("weights sum to " + std::to_string(sum) + ", expected 1");
  for (double& w : weights) w /= sum;
  weights_ = std::make_shared<const std::vector<double>>(std::move(weights));
}

MultiMixingWeights MultiMixingWeights::uniform(ProductGridPtr grid) {
  const std::size_t D = grid->size();
  return adopt(std::move(grid), std::make_shared<const std::vector<double>>(D, 1.0 / static_cast<double>(D)));
}

MultiMixingWeights MultiMixingWeights::product(std::span<const MixingWeights> factors) {
  if (factors.empty()) throw ConfigError("product needs at least one factor");
  for (const auto& f : factors)
    if (!(f.grid() == factors[0].grid())) throw ConfigError("product factors must share a base grid");
  auto grid = std::make_shared<const ProductGrid>(factors[0].grid_ptr(), static_cast<unsigned>(factors.size()));
  std::vector<double> w(grid->size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    double v = 1.0;
    for (unsigned c = 0; c < grid->k(); ++c) v *= factors[c][grid->digit(i, c)];
    w[i] = v;
  }
  return MultiMixingWeights(std::move(grid), std::move(w), 1e-9);
}

MixingWeights MultiMixingWeights::marginal(unsigned c) const {
  if (c >= grid_->k()) throw ConfigError("coordinate out of range");
  std::vector<double> m(grid_->base().size(), 0.0);
  for (std::size_t i = 0; i < size(); ++i) m[grid_->digit(i, c)] += (*weights_)[i];
  return MixingWeights::normalized(grid_->base_ptr(), std::move(m));
}

// ---------------------------------------------------------------------------

double multi_kernel(std::span<const Count> y, std::span<const double> theta) {
  if (y.size() != theta.size()) throw ConfigError("count and parameter vectors differ in length");
  double s = 0.0;
  for (std::size_t c = 0; c < y.size(); ++c) s += log_poisson_kernel(y[c], theta[c]);
  return s;
}

namespace {

void check_dims(const ProductGrid& grid, std::span<const Count> y) {
  if (y.size() != grid.k())
    throw ConfigError("count vector has " + std::to_string(y.size()) + " coordinates, expected " +
                      std::to_string(grid.k()));
}

// out[i] = sum_c base[c][digit(i, c)]
void combine_columns(const ProductGrid& grid, std::span<const std::span<const double>> base, std::span<double> out) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double s = 0.0;
    for (unsigned c = 0; c < grid.k(); ++c) s += base[c][grid.digit(i, c)];
    out[i] = s;
  }
}

std::vector<double> log_weights(std::span<const double> w) {
  std::vector<double> lw(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) lw[i] = safe_log(w[i]);
  return lw;
}

}  // namespace

void multi_log_kernel_column(const ProductGrid& grid, std::span<const Count> y, std::span<double> out) {
  check_dims(grid, y);
  const std::size_t d = grid.base().size();
  std::vector<std::vector<double>> cols(grid.k(), std::vector<double>(d));
  std::vector<std::span<const double>> views;
  for (unsigned c = 0; c < grid.k(); ++c) {
    log_kernel_column(grid.base(), y[c], cols[c]);
    views.emplace_back(cols[c]);
  }
  combine_columns(grid, views, out);
}

double log_multi_mixture_pmf(const MultiMixingWeights& g, std::span<const Count> y) {
  std::vector<double> col(g.size());
  multi_log_kernel_column(g.grid(), y, col);
  return log_sum_exp_pairs(log_weights(g.weights()), col);
}

// ---------------------------------------------------------------------------

MultiNewtonState::MultiNewtonState(ProductGridPtr grid, RateSchedule rate, std::optional<MultiMixingWeights> g0)
    : grid_(std::move(grid)), rate_(std::move(rate)) {
  if (!grid_) throw ConfigError("Newton state needs a grid");
  if (g0) {
    if (!(g0->grid() == *grid_)) throw ConfigError("initial weights live on a different grid");
    weights_ = std::make_shared<std::vector<double>>(g0->weights().begin(), g0->weights().end());
  } else {
    weights_ = std::make_shared<std::vector<double>>(grid_->size(), 1.0 / static_cast<double>(grid_->size()));
  }
  column_.resize(grid_->size());
  scratch_.resize(grid_->size());
  cache_ = std::make_shared<KernelCache>(grid_->base_ptr());
}

MultiNewtonState::MultiNewtonState(ProductGridPtr grid, RateSchedule rate, std::vector<double> weights,
                                   std::uint64_t n)
    : MultiNewtonState(grid, std::move(rate)) {
  MultiMixingWeights check(grid, weights, 1e-9);
  *weights_ = std::move(weights);
  n_ = n;
}

void MultiNewtonState::update(std::span<const Count> y) {
  check_dims(*grid_, y);
  std::vector<std::span<const double>> base;
  for (unsigned c = 0; c < grid_->k(); ++c) base.push_back(cache_->column(y[c]));
  combine_columns(*grid_, base, column_);
  const double log_p = detail::posterior_into(*weights_, column_, scratch_);
  if (degenerate_log_mass(log_p)) {
    std::string ys;
    for (auto v : y) ys += (ys.empty() ? "" : ",") + std::to_string(v);
    throw DegenerateLikelihood(y[0], n_, "p_g(y) underflows for y=(" + ys + ") after n=" + std::to_string(n_));
  }
  const double a = rate_.at(n_ + 1);
  if (weights_.use_count() > 1) weights_ = std::make_shared<std::vector<double>>(*weights_);
  detail::blend_into(*weights_, scratch_, a);
  ++n_;
}

MultiMixingWeights MultiNewtonState::snapshot() const {
  return MultiMixingWeights::adopt(grid_, std::shared_ptr<const std::vector<double>>(weights_));
}

// ---------------------------------------------------------------------------

double multi_estimate(const MultiMixingWeights& g, std::span<const Count> y, unsigned j) {
  check_dims(g.grid(), y);
  if (j >= g.grid().k()) throw ConfigError("coordinate out of range");
  const double lp0 = log_multi_mixture_pmf(g, y);
  std::vector<Count> up(y.begin(), y.end());
  ++up[j];
  const double lp1 = log_multi_mixture_pmf(g, up);
  if (!std::isfinite(lp0) || !std::isfinite(lp1))
    throw DegenerateLikelihood(y[j], 0, "p_g(y) or p_g(y + e_j) underflows");
  return static_cast<double>(y[j] + 1) * std::exp(lp1 - lp0);
}

namespace {

/// Visits every point of {0..y_max}^k in lexicographic order.
template <class F>
void for_each_lattice_point(unsigned k, Count y_max, F&& f) {
  std::vector<Count> z(k, 0);
  while (true) {
    f(std::span<const Count>(z));
    unsigned c = k;
    while (c > 0) {
      --c;
      if (z[c] < y_max) {
        ++z[c];
        break;
      }
      z[c] = 0;
      if (c == 0) return;
    }
  }
}

}  // namespace

Eigen::MatrixXd multi_clt_covariance(const MultiMixingWeights& g, std::span<const Count> y, Count y_max) {
  const auto& grid = g.grid();
  check_dims(grid, y);
  if (grid.size() > kCovarianceCap)
    throw ConfigError("covariance is limited to D <= " + std::to_string(kCovarianceCap) + " atoms");
  const unsigned k = grid.k();
  const std::size_t D = grid.size(), d = grid.base().size();
  const auto lw = log_weights(g.weights());

  // r[a][i] = k(y + e_a | i) / p(y + e_a) - k(y | i) / p(y)
  std::vector<double> col0(D), col1(D);
  multi_log_kernel_column(grid, y, col0);
  const double lp0 = log_sum_exp_pairs(lw, col0);
  if (!std::isfinite(lp0)) throw DegenerateLikelihood(y[0], 0, "p_g(y) underflows");
  std::vector<std::vector<double>> r(k, std::vector<double>(D));
  std::vector<double> theta_hat(k);
  for (unsigned a = 0; a < k; ++a) {
    std::vector<Count> up(y.begin(), y.end());
    ++up[a];
    multi_log_kernel_column(grid, up, col1);
    const double lp1 = log_sum_exp_pairs(lw, col1);
    if (!std::isfinite(lp1)) throw DegenerateLikelihood(up[a], 0, "p_g(y + e_j) underflows");
    theta_hat[a] = static_cast<double>(up[a]) * std::exp(lp1 - lp0);
    for (std::size_t i = 0; i < D; ++i) r[a][i] = std::exp(col1[i] - lp1) - std::exp(col0[i] - lp0);
  }

  std::vector<std::vector<double>> base(y_max + 1, std::vector<double>(d));
  for (Count z = 0; z <= y_max; ++z) log_kernel_column(grid.base(), z, base[z]);

  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd s(k);
  std::vector<double> colz(D), post(D);
  std::vector<std::span<const double>> views(k);
  for_each_lattice_point(k, y_max, [&](std::span<const Count> z) {
    for (unsigned c = 0; c < k; ++c) views[c] = base[z[c]];
    combine_columns(grid, views, colz);
    const double lp = detail::posterior_into(g.weights(), colz, post);
    if (!std::isfinite(lp)) return;
    for (unsigned a = 0; a < k; ++a) {
      double acc = 0.0;
      for (std::size_t i = 0; i < D; ++i) acc += post[i] * r[a][i];
      s[a] = acc;
    }
    W.noalias() += std::exp(lp) * s * s.transpose();
  });
  for (unsigned a = 0; a < k; ++a)
    for (unsigned b = 0; b < k; ++b) W(a, b) *= theta_hat[a] * theta_hat[b];
  return 0.5 * (W + W.transpose());
}

double multi_regret(const MultiMixingWeights& g_a, const MultiMixingWeights& g_b, Count y_max) {
  if (!(g_a.grid() == g_b.grid())) throw ConfigError("regret needs both mixing distributions on one grid");
  const unsigned k = g_a.grid().k();
  double total = 0.0;
  for_each_lattice_point(k, y_max, [&](std::span<const Count> z) {
    const double lpb = log_multi_mixture_pmf(g_b, z);
    if (!std::isfinite(lpb)) return;
    double sq = 0.0;
    for (unsigned j = 0; j < k; ++j) {
      const double e = multi_estimate(g_a, z, j) - multi_estimate(g_b, z, j);
      sq += e * e;
    }
    total += sq * std::exp(lpb);
  });
  return total;
}

// ---------------------------------------------------------------------------

std::vector<std::byte> serialize_multi_state(const MultiNewtonState& state) {
  const auto& power = state.rate().power();
  if (!power) throw ConfigError("only power-schedule states can be serialized");
  StateRecord r;
  r.k = state.grid().k();
  r.base_grid.assign(state.grid().base().points().begin(), state.grid().base().points().end());
  r.n = state.n();
  r.alpha = power->alpha();
  r.gamma = power->gamma();
  r.weights.assign(state.weights().begin(), state.weights().end());
  return encode_state(r);
}

MultiNewtonState deserialize_multi_state(std::span<const std::byte> bytes) {
  StateRecord r = decode_state(bytes);
  try {
    auto grid = std::make_shared<const ProductGrid>(make_grid(std::move(r.base_grid)), r.k);
    return MultiNewtonState(std::move(grid), LearningRate(r.alpha, r.gamma), std::move(r.weights), r.n);
  } catch (const Error& e) {
    throw FormatError(std::string("state file content invalid: ") + e.what());
  }
}

void save_multi_state(const MultiNewtonState& state, const std::filesystem::path& path) {
  write_file_bytes(path, serialize_multi_state(state));
}

MultiNewtonState load_multi_state(const std::filesystem::path& path) {
  return deserialize_multi_state(read_file_bytes(path));
}

}  // namespace qbeb
