// qbeb: streaming quasi-Bayes empirical Bayes for Poisson counts.

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "qbeb/baselines.hpp"
#include "qbeb/errors.hpp"
#include "qbeb/evaluation.hpp"
#include "qbeb/grid_builder.hpp"
#include "qbeb/inference.hpp"
#include "qbeb/ingest.hpp"
#include "qbeb/newton.hpp"
#include "qbeb/serialization.hpp"

namespace {

using namespace qbeb;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string out;
  bool no_meta = false;
  std::uint64_t seed = 1;
};

class Output {
 public:
  Output(const Common& c, const std::string& command) {
    if (!c.out.empty()) {
      file_.open(c.out, std::ios::trunc);
      if (!file_) throw ConfigError("cannot write " + c.out);
    }
    if (!c.no_meta) {
      const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
      std::tm tm{};
      gmtime_r(&now, &tm);
      stream() << "# qbeb " << command << " generated " << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << '\n';
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--out", c.out, "Output file (default stdout)");
  cmd->add_flag("--no-meta", c.no_meta, "Omit the timestamp header and timings");
  cmd->add_option("--seed", c.seed, "Random seed");
}

/// "0..7", "0,2,5" or "3".
std::vector<Count> parse_y_list(const std::string& s) {
  std::vector<Count> ys;
  auto num = [&](const std::string& t) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(t, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (t.empty() || pos != t.size() || t[0] == '-') throw ConfigError("bad count '" + t + "' in --y");
    return static_cast<Count>(v);
  };
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      ys.push_back(num(part));
      continue;
    }
    const Count lo = num(part.substr(0, dots)), hi = num(part.substr(dots + 2));
    if (hi < lo) throw ConfigError("empty range '" + part + "' in --y");
    for (Count y = lo; y <= hi; ++y) ys.push_back(y);
  }
  if (ys.empty()) throw ConfigError("--y lists no counts");
  return ys;
}

template <class T>
std::vector<T> parse_list(const std::string& s, const char* flag) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::istringstream in(part);
    T v{};
    if (!(in >> v) || !in.eof()) throw ConfigError(std::string("bad entry '") + part + "' in " + flag);
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(std::string(flag) + " is empty");
  return out;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  Common common;
  std::string prior;
  std::size_t n = 500;
  int replications = 1;
  std::string methods = "qbeb";
  std::string input;
  std::string format = "counts-lines";
  double window = 30.0;
  double eta = 0.025;
  int k = 2;
  std::size_t dcap = 10'000;
  double theta_max = 0.0;
  double alpha = 1.0;
  double gamma = 0.99;
  std::string state;
  std::string resume;
  bool skip_degenerate = false;
};

int fit_synthetic(const FitArgs& a) {
  ExperimentConfig cfg{.prior = PriorSpec::parse(a.prior)};
  cfg.n = a.n;
  cfg.eta = a.eta;
  cfg.k = a.k;
  cfg.d_cap = a.dcap;
  cfg.rate = LearningRate(a.alpha, a.gamma);
  if (a.theta_max > 0.0)
    cfg.grid = std::make_shared<const Grid>(Grid::equispaced(a.eta, a.theta_max, a.dcap));
  if (a.replications < 1) throw ConfigError("--replications must be >= 1");

  std::vector<std::string> methods;
  std::stringstream ss(a.methods);
  for (std::string m; std::getline(ss, m, ',');) methods.push_back(m);

  Output out(a.common, "fit");
  out.stream() << metrics_csv_header() << '\n';
  for (int r = 0; r < a.replications; ++r) {
    const std::uint64_t seed = a.common.seed + static_cast<std::uint64_t>(r);
    for (const auto& m : methods) {
      MetricRow row = (m == "qbeb" || m == "qb-eb" || m == "QB-EB")
                          ? run_qbeb_experiment(cfg, seed)
                          : run_baseline_experiment(cfg, parse_method(m), seed);
      if (a.common.no_meta) row.cpu_per_update_ms = -1.0;
      out.stream() << to_csv_row(row) << '\n';
    }
  }
  return 0;
}

int fit_data(const FitArgs& a) {
  const auto fmt = IngestFormat::parse(a.format, a.window);
  std::vector<Count> ys;
  if (fmt.kind == IngestFormat::Kind::CountsLines) ys = read_counts(std::filesystem::path(a.input));
  else ys = stream_order(ingest(std::filesystem::path(a.input), fmt), a.common.seed);

  std::optional<NewtonState> state;
  if (!a.resume.empty()) {
    state = load_state(a.resume);
  } else {
    GridPtr grid;
    if (a.theta_max > 0.0) {
      grid = std::make_shared<const Grid>(Grid::equispaced(a.eta, a.theta_max, a.dcap));
    } else {
      GridSpec spec{a.eta, a.k, empirical_moment(ys, a.k), a.dcap};
      if (!(spec.m_k > 0.0)) throw ConfigError("all counts are zero; pass --theta-max to fix the grid");
      grid = std::make_shared<const Grid>(build_equispaced_grid(spec));
    }
    state.emplace(grid, LearningRate(a.alpha, a.gamma));
  }

  std::uint64_t skipped = 0;
  const auto t0 = std::chrono::steady_clock::now();
  if (a.skip_degenerate) {
    for (Count y : ys) {
      try {
        state->update(y);
      } catch (const DegenerateLikelihood& e) {
        ++skipped;
        std::cerr << "warning: skipped count " << y << ": " << e.what() << '\n';
      }
    }
  } else {
    state->update_stream(ys);
  }
  const auto t1 = std::chrono::steady_clock::now();
  if (!a.state.empty()) save_state(*state, a.state);

  Output out(a.common, "fit");
  const auto& power = *state->rate().power();
  out.stream() << "n,d,theta_min,theta_max,alpha,gamma,skipped,cpu_per_update_ms\n" << std::setprecision(10)
               << state->n() << ',' << state->grid().size() << ',' << state->grid().front() << ','
               << state->grid().back() << ',' << power.alpha() << ',' << power.gamma() << ',' << skipped << ',';
  if (a.common.no_meta) out.stream() << "NA\n";
  else
    out.stream() << std::chrono::duration<double, std::milli>(t1 - t0).count() / static_cast<double>(ys.size())
                 << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct EstimateArgs {
  Common common;
  std::string state;
  std::string ys = "0..10";
  double level = 0.95;
  Count y_max = 0;
};

int run_estimate(const EstimateArgs& a) {
  const auto state = load_state(a.state);
  const auto ys = parse_y_list(a.ys);
  Output out(a.common, "estimate");
  out.stream() << estimate_csv_header() << '\n';
  for (Count y : ys) {
    const auto r = credible_interval(state, y, a.level, a.y_max > 0 ? std::optional<Count>(a.y_max) : std::nullopt);
    out.stream() << to_csv_row(r) << '\n';
  }
  return 0;
}

struct BaselineArgs {
  Common common;
  std::string method = "robbins";
  std::string input;
  std::string format = "histogram-csv";
  double window = 30.0;
  bool markdown = false;
  std::size_t grid_points = 1000;
  int max_iters = 500;
  double tol = 1e-8;
};

int run_baseline(const BaselineArgs& a) {
  const auto h = ingest(std::filesystem::path(a.input), IngestFormat::parse(a.format, a.window));
  std::vector<BaselineMethod> methods;
  if (a.method == "all") methods = {BaselineMethod::Robbins, BaselineMethod::Npmle, BaselineMethod::Npmd,
                                    BaselineMethod::Peb};
  else
    for (const auto& m : parse_list<std::string>(a.method, "--method")) methods.push_back(parse_method(m));
  VdmConfig vdm{default_vdm_grid(h, a.grid_points), a.max_iters, a.tol};
  std::vector<BaselineTable> tables;
  for (auto m : methods) {
    tables.push_back(baseline_estimates(h, m, vdm));
    const auto& t = tables.back();
    if (t.objective)
      std::cerr << method_name(m) << ": objective " << std::setprecision(10) << *t.objective
                << (t.converged ? "" : " (not converged)") << '\n';
  }
  Output out(a.common, "baseline");
  out.stream() << (a.markdown ? baseline_markdown(h, tables) : baseline_csv(tables));
  return 0;
}

struct BenchArgs {
  Common common;
  std::string prior = "weibull:5,3";
  std::string d_values = "1000,10000";
  std::string windows = "100-200,900-1000";
  double theta_max = 10'000.0;
};

int run_bench(const BenchArgs& a) {
  TimingConfig cfg{.prior = PriorSpec::parse(a.prior)};
  cfg.d_values = parse_list<std::size_t>(a.d_values, "--d");
  for (const auto& w : parse_list<std::string>(a.windows, "--windows")) {
    const auto dash = w.find('-');
    if (dash == std::string::npos) throw ConfigError("window '" + w + "' must look like lo-hi");
    cfg.windows.emplace_back(std::stoull(w.substr(0, dash)), std::stoull(w.substr(dash + 1)));
  }
  cfg.theta_max = a.theta_max;
  cfg.seed = a.common.seed;
  const auto rows = timing_harness(cfg);
  Output out(a.common, "bench");
  out.stream() << "d,n_lo,n_hi,median_ms\n";
  for (const auto& r : rows) {
    out.stream() << r.d << ',' << r.n_lo << ',' << r.n_hi << ',';
    if (a.common.no_meta) out.stream() << "NA\n";
    else out.stream() << std::setprecision(6) << r.median_ms << '\n';
  }
  return 0;
}

struct RegretArgs {
  Common common;
  std::string oracle = "atoms:1,2,4,7,10";
  std::string checkpoints = "2000,20000";
  int replications = 20;
  double alpha = 1.0;
  double gamma = 0.75;
};

int run_regret(const RegretArgs& a) {
  ExperimentConfig cfg{.prior = PriorSpec::parse(a.oracle)};
  cfg.rate = LearningRate(a.alpha, a.gamma);
  if (a.replications < 1) throw ConfigError("--replications must be >= 1");
  cfg.seeds.clear();
  for (int r = 0; r < a.replications; ++r) cfg.seeds.push_back(a.common.seed + static_cast<std::uint64_t>(r));
  const auto cps = parse_list<std::uint64_t>(a.checkpoints, "--checkpoints");
  const auto diag = regret_decay_diagnostic(cfg, cps);
  Output out(a.common, "regret");
  out.stream() << "seed,n,regret\n" << std::setprecision(10);
  for (std::size_t s = 0; s < cfg.seeds.size(); ++s)
    for (std::size_t c = 0; c < cps.size(); ++c)
      out.stream() << cfg.seeds[s] << ',' << cps[c] << ',' << diag.regrets[s][c] << '\n';
  out.stream() << "# median_slope," << diag.median_slope << "\n# median_final_tv," << diag.median_final_tv << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming quasi-Bayes empirical Bayes for Poisson counts"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Run the recursion on synthetic or real counts");
  add_common(fit_cmd, fit.common);
  auto* prior_opt = fit_cmd->add_option("--prior", fit.prior, "Synthetic prior, e.g. weibull:5,3");
  auto* input_opt = fit_cmd->add_option("--input", fit.input, "Count data file")->check(CLI::ExistingFile);
  prior_opt->excludes(input_opt);
  fit_cmd->add_option("--n", fit.n, "Synthetic sample size")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--replications", fit.replications, "Seeds seed, seed+1, ...");
  fit_cmd->add_option("--methods", fit.methods, "qbeb,robbins,npmle,npmd,peb");
  fit_cmd->add_option("--format", fit.format, "counts-lines | histogram-csv | event-window");
  fit_cmd->add_option("--window", fit.window, "Event window in seconds");
  fit_cmd->add_option("--eta", fit.eta, "Grid spacing / first grid point");
  fit_cmd->add_option("--k", fit.k, "Moment order for the grid size");
  fit_cmd->add_option("--dcap", fit.dcap, "Grid size cap");
  fit_cmd->add_option("--theta-max", fit.theta_max, "Fix the grid to dcap points on [eta, theta-max]");
  fit_cmd->add_option("--alpha", fit.alpha, "Learning-rate offset");
  fit_cmd->add_option("--gamma", fit.gamma, "Learning-rate exponent in (1/2, 1]");
  auto* state_opt = fit_cmd->add_option("--state", fit.state, "Save the final state here");
  auto* resume_opt = fit_cmd->add_option("--resume", fit.resume, "Continue from a saved state");
  fit_cmd->add_flag("--skip-degenerate", fit.skip_degenerate, "Skip counts the grid cannot explain");
  state_opt->needs(input_opt);
  resume_opt->needs(input_opt)->check(CLI::ExistingFile);

  EstimateArgs est;
  auto* est_cmd = app.add_subcommand("estimate", "Estimates and credible intervals from a saved state");
  add_common(est_cmd, est.common);
  est_cmd->add_option("--state", est.state)->required()->check(CLI::ExistingFile);
  est_cmd->add_option("--y", est.ys, "Counts: 0..7 or 0,3,5");
  est_cmd->add_option("--level", est.level, "Credible level in [0, 1)");
  est_cmd->add_option("--y-max", est.y_max, "Series truncation (default from the grid)");

  BaselineArgs base;
  auto* base_cmd = app.add_subcommand("baseline", "Batch comparators on a histogram");
  add_common(base_cmd, base.common);
  base_cmd->add_option("--method", base.method, "robbins | npmle | npmd | peb | all (comma list allowed)");
  base_cmd->add_option("--input", base.input)->required()->check(CLI::ExistingFile);
  base_cmd->add_option("--format", base.format);
  base_cmd->add_option("--window", base.window);
  base_cmd->add_flag("--markdown", base.markdown, "Emit a markdown table");
  base_cmd->add_option("--grid-points", base.grid_points, "Vertex-direction grid size");
  base_cmd->add_option("--max-iters", base.max_iters);
  base_cmd->add_option("--tol", base.tol);

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Per-update timing");
  add_common(bench_cmd, bench.common);
  bench_cmd->add_option("--prior", bench.prior, "Prior generating the timed stream");
  bench_cmd->add_option("--d", bench.d_values, "Comma-separated grid sizes");
  bench_cmd->add_option("--windows", bench.windows, "Comma-separated lo-hi update ranges");
  bench_cmd->add_option("--theta-max", bench.theta_max, "Upper grid endpoint");

  RegretArgs reg;
  auto* reg_cmd = app.add_subcommand("regret", "Regret decay against a grid-supported oracle");
  add_common(reg_cmd, reg.common);
  reg_cmd->add_option("--oracle", reg.oracle, "atoms:t1,..@w1,..");
  reg_cmd->add_option("--checkpoints", reg.checkpoints, "Comma-separated increasing n values");
  reg_cmd->add_option("--replications", reg.replications, "Seeds seed, seed+1, ...");
  reg_cmd->add_option("--alpha", reg.alpha, "Learning-rate offset");
  reg_cmd->add_option("--gamma", reg.gamma, "Learning-rate exponent in (1/2, 1]");

  Common dump_common;
  std::string dump_state;
  auto* dump_cmd = app.add_subcommand("dump", "Weights of a saved state as JSON lines");
  dump_cmd->add_option("--state", dump_state)->required()->check(CLI::ExistingFile);
  dump_cmd->add_option("--out", dump_common.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*fit_cmd) {
      if (fit.prior.empty() == fit.input.empty()) throw ConfigError("fit needs exactly one of --prior or --input");
      return fit.prior.empty() ? fit_data(fit) : fit_synthetic(fit);
    }
    if (*est_cmd) return run_estimate(est);
    if (*base_cmd) return run_baseline(base);
    if (*bench_cmd) return run_bench(bench);
    if (*reg_cmd) return run_regret(reg);
    if (*dump_cmd) {
      dump_common.no_meta = true;
      Output out(dump_common, "dump");
      dump_weights_jsonl(load_state(dump_state).snapshot(), out.stream());
      return 0;
    }
  } catch (const DegenerateLikelihood& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}
