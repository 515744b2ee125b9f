#include "qbeb/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "qbeb/errors.hpp"
#include "qbeb/inference.hpp"

namespace qbeb {

CompoundSample generate_compound(const PriorSpec& prior, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("sample size must be >= 1");
  std::mt19937_64 rng(seed);
  CompoundSample s;
  s.thetas.reserve(n);
  s.ys.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = prior.sample(rng);
    s.thetas.push_back(theta);
    s.ys.push_back(static_cast<Count>(std::poisson_distribution<std::uint64_t>(theta)(rng)));
  }
  return s;
}

ErrorMetrics rmse_mad(std::span<const double> thetas, std::span<const double> estimates) {
  if (thetas.size() != estimates.size())
    throw ConfigError("rmse_mad: " + std::to_string(thetas.size()) + " parameters vs " +
                      std::to_string(estimates.size()) + " estimates");
  if (thetas.empty()) throw ConfigError("rmse_mad: empty input");
  double sq = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    const double e = estimates[i] - thetas[i];
    sq += e * e;
    ab += std::abs(e);
  }
  const auto n = static_cast<double>(thetas.size());
  return {std::sqrt(sq / n), ab / n};
}

RegretResult regret_detail(const MixingWeights& g_a, const MixingWeights& g_b, Count y_max) {
  if (!(g_a.grid() == g_b.grid())) throw ConfigError("regret needs both mixing distributions on one grid");
  // Both p_{g}(y) sequences are needed at y and y+1, so compute them once.
  std::vector<double> la(y_max + 2), lb(y_max + 2);
  for (Count y = 0; y <= y_max + 1; ++y) {
    la[y] = log_mixture_pmf(g_a, y);
    lb[y] = log_mixture_pmf(g_b, y);
  }
  RegretResult r;
  double mass = 0.0;
  for (Count y = 0; y <= y_max; ++y) {
    if (!std::isfinite(lb[y])) continue;
    const double pb = std::exp(lb[y]);
    mass += pb;
    if (!std::isfinite(la[y]) || !std::isfinite(la[y + 1]))
      throw DegenerateLikelihood(y, 0, "regret: p_g(y) underflows at y=" + std::to_string(y));
    const double ya = static_cast<double>(y + 1);
    const double ta = ya * std::exp(la[y + 1] - la[y]);
    const double tb = std::isfinite(lb[y + 1]) ? ya * std::exp(lb[y + 1] - lb[y]) : 0.0;
    r.value += (ta - tb) * (ta - tb) * pb;
  }
  r.tail_mass = std::max(0.0, 1.0 - mass);
  return r;
}

double regret(const MixingWeights& g_a, const MixingWeights& g_b, Count y_max) {
  return regret_detail(g_a, g_b, y_max).value;
}

RegretResult regret_vs_prior(const MixingWeights& g, const PriorSpec& oracle, Count y_max) {
  const auto p = oracle.marginal_pmf(y_max + 1);
  RegretResult r;
  double mass = 0.0;
  for (Count y = 0; y <= y_max; ++y) {
    if (!(p[y] > 0.0)) continue;
    mass += p[y];
    const double tb = static_cast<double>(y + 1) * p[y + 1] / p[y];
    const double ta = qb_estimate(g, y);
    r.value += (ta - tb) * (ta - tb) * p[y];
  }
  r.tail_mass = std::max(0.0, 1.0 - mass);
  return r;
}

double total_variation(const MixingWeights& a, const MixingWeights& b) {
  if (!(a.grid() == b.grid())) throw ConfigError("total variation needs a shared grid");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += std::abs(a[j] - b[j]);
  return 0.5 * s;
}

double median(std::vector<double> v) {
  if (v.empty()) throw ConfigError("median of an empty set");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (n < 1) throw ConfigError("experiment needs n >= 1");
  if (seeds.empty()) throw ConfigError("experiment needs at least one seed");
  if (!grid) GridSpec{eta, k, 1.0, d_cap}.validate();
}

GridPtr experiment_grid(const ExperimentConfig& cfg, std::span<const Count> ys) {
  if (cfg.grid) return cfg.grid;
  GridSpec spec{cfg.eta, cfg.k, empirical_moment(ys, cfg.k), cfg.d_cap};
  if (!(spec.m_k > 0.0)) throw ConfigError("sample moment is 0 (all counts zero); the grid is undefined");
  return std::make_shared<const Grid>(build_equispaced_grid(spec));
}

namespace {

MetricRow base_row(const ExperimentConfig& cfg, std::string method, std::uint64_t seed) {
  MetricRow r;
  r.method = std::move(method);
  r.prior = cfg.prior.name();
  r.n = cfg.n;
  r.eta = cfg.eta;
  r.gamma = cfg.rate.gamma();
  r.seed = seed;
  return r;
}

}  // namespace

MetricRow run_qbeb_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto sample = generate_compound(cfg.prior, cfg.n, seed);
  const auto grid = experiment_grid(cfg, sample.ys);
  NewtonState state(grid, cfg.rate);

  const auto t0 = std::chrono::steady_clock::now();
  state.update_stream(sample.ys);
  const auto t1 = std::chrono::steady_clock::now();

  const auto g = state.snapshot();
  std::map<Count, double> memo;
  std::vector<double> est(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    auto [it, fresh] = memo.try_emplace(sample.ys[i], 0.0);
    if (fresh) it->second = qb_estimate(g, sample.ys[i]);
    est[i] = it->second;
  }
  const auto m = rmse_mad(sample.thetas, est);
  MetricRow r = base_row(cfg, "QB-EB", seed);
  r.d = grid->size();
  r.rmse = m.rmse;
  r.mad = m.mad;
  r.cpu_per_update_ms = std::chrono::duration<double, std::milli>(t1 - t0).count() / static_cast<double>(cfg.n);
  return r;
}

MetricRow run_baseline_experiment(const ExperimentConfig& cfg, BaselineMethod method, std::uint64_t seed) {
  cfg.validate();
  const auto sample = generate_compound(cfg.prior, cfg.n, seed);
  const CountHistogram h(sample.ys);
  std::optional<VdmConfig> vdm;
  std::size_t d = 0;
  if (method == BaselineMethod::Npmle || method == BaselineMethod::Npmd) {
    vdm = VdmConfig{default_vdm_grid(h)};
    d = vdm->grid->size();
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto table = baseline_estimates(h, method, vdm);
  const auto t1 = std::chrono::steady_clock::now();
  std::vector<double> est(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) est[i] = table.estimates.at(sample.ys[i]);
  const auto m = rmse_mad(sample.thetas, est);
  MetricRow r = base_row(cfg, method_name(method), seed);
  r.d = d;
  r.rmse = m.rmse;
  r.mad = m.mad;
  r.cpu_per_update_ms = std::chrono::duration<double, std::milli>(t1 - t0).count() / static_cast<double>(cfg.n);
  return r;
}

std::string metrics_csv_header() { return "method,prior,n,d,eta,gamma,seed,rmse,mad,cpu_per_update_ms"; }

std::string to_csv_row(const MetricRow& r) {
  std::ostringstream os;
  os << std::setprecision(10) << r.method << ',' << r.prior << ',' << r.n << ',' << r.d << ',' << r.eta << ','
     << r.gamma << ',' << r.seed << ',' << r.rmse << ',' << r.mad << ',';
  if (r.cpu_per_update_ms < 0.0) os << "NA";
  else os << r.cpu_per_update_ms;
  return os.str();
}

std::string metrics_markdown(const std::vector<MetricRow>& rows) {
  std::vector<std::string> methods;
  std::map<std::size_t, std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>> cells;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    auto& c = cells[r.n][r.method];
    c.first.push_back(r.rmse);
    c.second.push_back(r.mad);
  }
  std::ostringstream os;
  os << "| |";
  for (const auto& m : methods) os << ' ' << m << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < methods.size(); ++i) os << "---|";
  os << '\n' << std::fixed << std::setprecision(3);
  for (const auto& [n, by_method] : cells) {
    for (int which = 0; which < 2; ++which) {
      os << "| " << (which == 0 ? "RMSE" : "MAD") << " n=" << n << " |";
      for (const auto& m : methods) {
        auto it = by_method.find(m);
        if (it == by_method.end()) {
          os << " - |";
          continue;
        }
        os << ' ' << median(which == 0 ? it->second.first : it->second.second) << " |";
      }
      os << '\n';
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------

DecayDiagnostic regret_decay_diagnostic(const ExperimentConfig& cfg, std::span<const std::uint64_t> checkpoints,
                                        std::optional<MixingWeights> g0) {
  cfg.validate();
  const auto* atoms = std::get_if<AtomsPrior>(&cfg.prior.family());
  if (!atoms) throw ConfigError("regret decay needs a grid-supported (atoms) oracle prior");
  if (checkpoints.size() < 2) throw ConfigError("regret decay needs at least two checkpoints");
  for (std::size_t i = 0; i < checkpoints.size(); ++i)
    if (checkpoints[i] == 0 || (i > 0 && checkpoints[i] <= checkpoints[i - 1]))
      throw ConfigError("checkpoints must be positive and strictly increasing");

  GridPtr grid = cfg.grid ? cfg.grid : make_grid(atoms->atoms);
  // Oracle weights on the grid: every atom must be a grid point.
  std::vector<double> w(grid->size(), 0.0);
  for (std::size_t a = 0; a < atoms->atoms.size(); ++a) {
    const auto pts = grid->points();
    auto it = std::lower_bound(pts.begin(), pts.end(), atoms->atoms[a]);
    if (it == pts.end() || *it != atoms->atoms[a])
      throw ConfigError("oracle atom " + std::to_string(atoms->atoms[a]) + " is not a grid point");
    w[static_cast<std::size_t>(it - pts.begin())] += atoms->weights[a];
  }
  const MixingWeights oracle(grid, std::move(w));
  const Count y_max = cfg.y_max.value_or(default_y_max(*grid));

  DecayDiagnostic out;
  out.checkpoints.assign(checkpoints.begin(), checkpoints.end());
  const std::size_t total = checkpoints.back();
  std::vector<double> lx;
  for (auto c : checkpoints) lx.push_back(std::log(static_cast<double>(c)));
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(lx.size());

  for (auto seed : cfg.seeds) {
    const auto sample = generate_compound(cfg.prior, total, seed);
    NewtonState state(grid, cfg.rate, g0);
    std::vector<double> regrets;
    std::size_t consumed = 0;
    for (auto c : checkpoints) {
      state.update_stream(std::span<const Count>(sample.ys).subspan(consumed, c - consumed));
      consumed = c;
      regrets.push_back(regret(state.snapshot(), oracle, y_max));
    }
    double sxy = 0.0, sxx = 0.0;
    const double my = [&] {
      double s = 0.0;
      for (double r : regrets) s += std::log(std::max(r, 1e-300));
      return s / static_cast<double>(regrets.size());
    }();
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (std::log(std::max(regrets[i], 1e-300)) - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    out.slopes.push_back(sxy / sxx);
    out.final_tv.push_back(total_variation(state.snapshot(), oracle));
    out.regrets.push_back(std::move(regrets));
  }
  out.median_slope = median(out.slopes);
  out.median_final_tv = median(out.final_tv);
  return out;
}

std::vector<TimingRow> timing_harness(const TimingConfig& cfg) {
  if (cfg.d_values.empty() || cfg.windows.empty()) throw ConfigError("timing needs d values and windows");
  std::uint64_t last = 0;
  for (const auto& [lo, hi] : cfg.windows) {
    if (lo < 1 || hi < lo) throw ConfigError("timing windows must satisfy 1 <= lo <= hi");
    last = std::max(last, hi);
  }
  const auto sample = generate_compound(cfg.prior, last, cfg.seed);
  std::vector<TimingRow> rows;
  for (auto d : cfg.d_values) {
    auto grid = std::make_shared<const Grid>(Grid::equispaced(cfg.eta, cfg.theta_max, d));
    NewtonState state(grid, cfg.rate);
    std::vector<double> ms(last);
    for (std::uint64_t i = 0; i < last; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      state.update(sample.ys[i]);
      const auto t1 = std::chrono::steady_clock::now();
      ms[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    for (const auto& [lo, hi] : cfg.windows)
      rows.push_back({d, lo, hi, median(std::vector<double>(ms.begin() + static_cast<std::ptrdiff_t>(lo - 1),
                                                            ms.begin() + static_cast<std::ptrdiff_t>(hi)))});
  }
  return rows;
}

}  // namespace qbeb
