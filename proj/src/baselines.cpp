#include "qbeb/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "qbeb/errors.hpp"
#include "qbeb/inference.hpp"

namespace qbeb {

void VdmConfig::validate() const {
  if (!grid) throw ConfigError("vertex direction needs a grid");
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (!(tol > 0.0)) throw ConfigError("tol must be > 0");
}

double robbins_estimate(const CountHistogram& h, Count y) {
  const auto ny = h.count(y);
  if (ny == 0) throw DomainError("Robbins estimate undefined at y=" + std::to_string(y) + " (n_y = 0)");
  return static_cast<double>(y + 1) * static_cast<double>(h.count(y + 1)) / static_cast<double>(ny);
}

GridPtr default_vdm_grid(const CountHistogram& h, std::size_t points) {
  const double top = std::max<double>(1.0, static_cast<double>(h.max_y()));
  return std::make_shared<const Grid>(Grid::equispaced(top / static_cast<double>(points), top, points));
}

// ---------------------------------------------------------------------------
// Vertex direction on a concave objective F(p), p = K g over the observed cells.

namespace {

enum class Objective { LogLikelihood, Affinity };

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Problem {
  Objective kind;
  std::size_t m;  // observed cells
  std::size_t d;  // grid atoms
  std::vector<double> w;       // n_y / N
  std::vector<double> sqrt_w;  // sqrt(n_y / N)
  std::vector<double> K;       // column-major: K[j * m + c] = k(y_c | theta_j)

  const double* column(std::size_t j) const { return K.data() + j * m; }

  double value(std::span<const double> p) const {
    double f = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      if (kind == Objective::LogLikelihood) {
        if (!(p[c] > 0.0)) return -kInf;
        f += w[c] * std::log(p[c]);
      } else {
        f += sqrt_w[c] * std::sqrt(std::max(p[c], 0.0));
      }
    }
    return f;
  }

  double partial(double pc, std::size_t c) const {
    if (!(pc > 0.0)) return kInf;
    return kind == Objective::LogLikelihood ? w[c] / pc : 0.5 * sqrt_w[c] / std::sqrt(pc);
  }

  /// d/dlambda F(p + lambda delta)
  double slope(std::span<const double> p, std::span<const double> delta, double lambda) const {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const double pc = p[c] + lambda * delta[c];
      if (!(pc > 0.0)) {
        if (delta[c] < 0.0) return -kInf;
        if (delta[c] > 0.0) return kInf;
        continue;
      }
      s += partial(pc, c) * delta[c];
    }
    return s;
  }

  std::vector<double> mixture(std::span<const double> g) const {
    std::vector<double> p(m, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      if (g[j] == 0.0) continue;
      const double* k = column(j);
      for (std::size_t c = 0; c < m; ++c) p[c] += g[j] * k[c];
    }
    return p;
  }

  /// D_j = sum_c dF/dp_c (K_cj - p_c) for every j.
  std::vector<double> directional(std::span<const double> p) const {
    std::vector<double> grad(m);
    double base = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      grad[c] = partial(p[c], c);
      base += grad[c] * p[c];
    }
    std::vector<double> D(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double* k = column(j);
      double s = 0.0;
      for (std::size_t c = 0; c < m; ++c) s += grad[c] * k[c];
      D[j] = s - base;
    }
    return D;
  }
};

Problem make_problem(const CountHistogram& h, const Grid& grid, Objective kind) {
  if (h.empty()) throw ConfigError("cannot fit an empty histogram");
  Problem pr{kind, h.entries().size(), grid.size(), {}, {}, {}};
  const double N = static_cast<double>(h.total());
  std::vector<Count> ys;
  for (const auto& [y, n] : h.entries()) {
    ys.push_back(y);
    pr.w.push_back(static_cast<double>(n) / N);
    pr.sqrt_w.push_back(std::sqrt(static_cast<double>(n) / N));
  }
  pr.K.resize(pr.m * pr.d);
  for (std::size_t j = 0; j < pr.d; ++j)
    for (std::size_t c = 0; c < pr.m; ++c)
      pr.K[j * pr.m + c] = std::exp(log_poisson_kernel(ys[c], grid[j]));
  return pr;
}

/// Maximizer of the concave phi(lambda) = F(p + lambda delta) on [0, 1].
double line_search(const Problem& pr, std::span<const double> p, std::span<const double> delta,
                   StepRule rule) {
  const double s0 = pr.slope(p, delta, 0.0);
  if (!(s0 > 0.0)) return 0.0;
  if (rule == StepRule::Armijo) {
    const double f0 = pr.value(p);
    std::vector<double> q(pr.m);
    for (double lambda = 1.0; lambda > 1e-14; lambda *= 0.5) {
      for (std::size_t c = 0; c < pr.m; ++c) q[c] = p[c] + lambda * delta[c];
      if (pr.value(q) >= f0 + 1e-4 * lambda * s0) return lambda;
    }
    return 0.0;
  }
  if (pr.slope(p, delta, 1.0) >= 0.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 100 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (pr.slope(p, delta, mid) > 0.0 ? lo : hi) = mid;
  }
  return lo;
}

/// Lawson-Hanson nonnegative least squares: argmin_{x >= 0} |A x - b|.
Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const Eigen::Index n = A.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 1e-12 * (1.0 + A.cwiseAbs().maxCoeff() * b.cwiseAbs().maxCoeff());
  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    Eigen::MatrixXd Ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) Ap.col(static_cast<Eigen::Index>(i)) = A.col(idx[i]);
    const Eigen::VectorXd zp = Ap.colPivHouseholderQr().solve(b);
    z.setZero(n);
    for (std::size_t i = 0; i < idx.size(); ++i) z[idx[i]] = zp[static_cast<Eigen::Index>(i)];
  };
  for (Eigen::Index outer = 0; outer < 3 * n + 10; ++outer) {
    const Eigen::VectorXd w = A.transpose() * (b - A * x);
    Eigen::Index t = -1;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[static_cast<std::size_t>(j)] && w[j] > tol && (t < 0 || w[j] > w[t])) t = j;
    if (t < 0) break;
    passive[static_cast<std::size_t>(t)] = true;
    Eigen::VectorXd z;
    for (Eigen::Index inner = 0; inner <= n; ++inner) {
      solve_passive(z);
      double step = 1.0;
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) {
          feasible = false;
          step = std::min(step, x[j] / (x[j] - z[j]));
        }
      }
      if (feasible) break;
      x += step * (z - x);
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && x[j] <= 1e-15) {
          passive[static_cast<std::size_t>(j)] = false;
          x[j] = 0.0;
        }
    }
    x = z.cwiseMax(0.0);
  }
  return x;
}

/// Maximizer over the simplex on `support` of the second-order model of F at p.
std::vector<double> support_newton(const Problem& pr, std::span<const double> p,
                                   const std::vector<std::size_t>& support) {
  const auto m = static_cast<Eigen::Index>(pr.m);
  const auto s = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd A(m + 1, s);
  Eigen::VectorXd b(m + 1);
  for (Eigen::Index c = 0; c < m; ++c) {
    const auto cu = static_cast<std::size_t>(c);
    if (!(p[cu] > 0.0)) return {};
    const double grad = pr.partial(p[cu], cu);
    const double curv = pr.kind == Objective::LogLikelihood ? pr.w[cu] / (p[cu] * p[cu])
                                                            : 0.25 * pr.sqrt_w[cu] / (p[cu] * std::sqrt(p[cu]));
    const double r = std::sqrt(curv);
    for (Eigen::Index j = 0; j < s; ++j) A(c, j) = r * pr.column(support[static_cast<std::size_t>(j)])[cu];
    b[c] = r * (p[cu] + grad / curv);
  }
  const double rho = A.topRows(m).cwiseAbs().maxCoeff();
  A.row(m).setConstant(rho);
  b[m] = rho;
  const Eigen::VectorXd x = nnls(A, b);
  const double sum = x.sum();
  if (!(sum > 0.0) || !x.allFinite()) return {};
  std::vector<double> out(support.size());
  for (Eigen::Index j = 0; j < s; ++j) out[static_cast<std::size_t>(j)] = x[j] / sum;
  return out;
}

VdmResult run_vdm(const CountHistogram& h, const VdmConfig& cfg, Objective kind) {
  cfg.validate();
  const Problem pr = make_problem(h, *cfg.grid, kind);
  const std::size_t d = pr.d, m = pr.m;
  // Reported objective: per-observation log-likelihood, or squared Hellinger
  // distance 1 - affinity (to be minimized).
  auto report = [&](double f) { return kind == Objective::LogLikelihood ? f : 1.0 - f; };

  std::vector<double> g(d, 1.0 / static_cast<double>(d));
  std::vector<double> p = pr.mixture(g);
  double f = pr.value(p);

  VdmResult res{MixingWeights::uniform(cfg.grid), {report(f)}, 0.0, 0, false};
  std::vector<double> delta(m), trial_g(d);

  // Accept a candidate only if it does not lower the objective.
  auto accept = [&](std::vector<double>& cand_g) {
    auto cand_p = pr.mixture(cand_g);
    const double cand_f = pr.value(cand_p);
    if (cand_f >= f) {
      g.swap(cand_g);
      p.swap(cand_p);
      f = cand_f;
    }
  };

  for (int it = 1; it <= cfg.max_iters; ++it) {
    auto D = pr.directional(p);
    const auto jmax = static_cast<std::size_t>(std::max_element(D.begin(), D.end()) - D.begin());
    if (D[jmax] <= cfg.tol) {
      res.converged = true;
      break;
    }
    res.iterations = it;

    // Vertex step toward the steepest atom.
    const double* kmax = pr.column(jmax);
    for (std::size_t c = 0; c < m; ++c) delta[c] = kmax[c] - p[c];
    double lambda = line_search(pr, p, delta, cfg.step_rule);
    if (lambda > 0.0) {
      trial_g = g;
      for (double& v : trial_g) v *= 1.0 - lambda;
      trial_g[jmax] += lambda;
      accept(trial_g);
    }

    // Newton step on the active support: the quadratic model of F in p,
    // restricted to the current atoms plus local maxima of D, solved as a
    // nonnegative least-squares problem with the simplex constraint as a
    // heavily weighted row; then backtracking toward the solution.
    D = pr.directional(p);
    std::vector<std::size_t> support;
    for (std::size_t j = 0; j < d; ++j) {
      const bool peak = D[j] > 0.0 && (j == 0 || D[j] >= D[j - 1]) && (j + 1 == d || D[j] >= D[j + 1]);
      if (g[j] > 0.0 || peak) support.push_back(j);
    }
    const auto x = support_newton(pr, p, support);
    if (!x.empty()) {
      std::vector<double> target(d, 0.0);
      for (std::size_t s = 0; s < support.size(); ++s) target[support[s]] = x[s];
      for (double t = 1.0; t > 1e-10; t *= 0.5) {
        trial_g = g;
        for (std::size_t j = 0; j < d; ++j) trial_g[j] = (1.0 - t) * g[j] + t * target[j];
        const double before = f;
        accept(trial_g);
        if (f > before) break;
      }
    }
    res.objective_trace.push_back(report(f));
  }

  const auto D = pr.directional(p);
  res.certificate = 1.0 + *std::max_element(D.begin(), D.end());
  if (!res.converged) res.converged = res.certificate - 1.0 <= cfg.tol;
  res.weights = MixingWeights::normalized(cfg.grid, g);
  return res;
}

}  // namespace

VdmResult npmle_vdm(const CountHistogram& h, const VdmConfig& cfg) {
  return run_vdm(h, cfg, Objective::LogLikelihood);
}

VdmResult npmd_hellinger(const CountHistogram& h, const VdmConfig& cfg) {
  return run_vdm(h, cfg, Objective::Affinity);
}

// ---------------------------------------------------------------------------
// Gamma-Poisson marginal likelihood.

double peb_log_likelihood(const CountHistogram& h, GammaHyper hp) {
  const double a = hp.shape, b = hp.rate;
  const double log_p = std::log(b / (1.0 + b));
  const double log_q = -std::log1p(b);
  double ll = 0.0;
  for (const auto& [y, n] : h.entries()) {
    const double yd = static_cast<double>(y);
    ll += static_cast<double>(n) *
          (std::lgamma(yd + a) - std::lgamma(a) - std::lgamma(yd + 1.0) + a * log_p + yd * log_q);
  }
  return ll;
}

std::array<double, 2> peb_log_gradient(const CountHistogram& h, GammaHyper hp) {
  const double a = hp.shape, b = hp.rate;
  const double N = static_cast<double>(h.total());
  double S = 0.0, da = 0.0;
  const double psi_a = boost::math::digamma(a);
  for (const auto& [y, n] : h.entries()) {
    const double yd = static_cast<double>(y);
    S += static_cast<double>(n) * yd;
    da += static_cast<double>(n) * (boost::math::digamma(yd + a) - psi_a);
  }
  da += N * std::log(b / (1.0 + b));
  const double db = N * a / b - (N * a + S) / (1.0 + b);
  return {a * da, b * db};
}

namespace {

constexpr double kShapeCap = 1e6;

PebFit boundary_fit(const CountHistogram& h, double mean) {
  PebFit fit;
  fit.boundary = true;
  if (mean <= 0.0) {
    fit.hyper = {1.0, kShapeCap};
  } else {
    fit.hyper = {kShapeCap, kShapeCap / mean};
  }
  fit.log_likelihood = peb_log_likelihood(h, fit.hyper);
  return fit;
}

}  // namespace

PebFit peb_gamma_fit(const CountHistogram& h) {
  if (h.total() < 2) throw ConfigError("P-EB fit needs at least two observations");
  const double N = static_cast<double>(h.total());
  double mean = 0.0, sq = 0.0;
  for (const auto& [y, n] : h.entries()) {
    mean += static_cast<double>(n) * static_cast<double>(y);
    sq += static_cast<double>(n) * static_cast<double>(y) * static_cast<double>(y);
  }
  mean /= N;
  const double var = sq / N - mean * mean;
  // No overdispersion: the likelihood increases toward shape -> inf at fixed mean.
  if (h.entries().size() < 2 || var <= mean) return boundary_fit(h, mean);

  // Method-of-moments start, then BFGS on x = (log a, log b) minimizing -ll / N.
  double a0 = mean * mean / (var - mean);
  std::array<double, 2> x{std::log(a0), std::log(a0 / mean)};
  auto objective = [&](const std::array<double, 2>& v) {
    return -peb_log_likelihood(h, {std::exp(v[0]), std::exp(v[1])}) / N;
  };
  auto gradient = [&](const std::array<double, 2>& v) {
    auto gr = peb_log_gradient(h, {std::exp(v[0]), std::exp(v[1])});
    return std::array<double, 2>{-gr[0] / N, -gr[1] / N};
  };

  PebFit fit;
  std::array<double, 4> H{1.0, 0.0, 0.0, 1.0};  // inverse Hessian approximation
  double fx = objective(x);
  auto gx = gradient(x);
  const double log_cap = std::log(kShapeCap);
  for (int it = 1; it <= 500; ++it) {
    fit.iterations = it;
    fit.trace.push_back({it, std::exp(x[0]), std::exp(x[1]), -fx * N});
    const double gnorm = std::hypot(gx[0], gx[1]);
    if (gnorm < 1e-10) break;
    std::array<double, 2> dir{-(H[0] * gx[0] + H[1] * gx[1]), -(H[2] * gx[0] + H[3] * gx[1])};
    double slope = dir[0] * gx[0] + dir[1] * gx[1];
    if (slope >= 0.0) {
      H = {1.0, 0.0, 0.0, 1.0};
      dir = {-gx[0], -gx[1]};
      slope = -gnorm * gnorm;
    }
    // Safeguard: cap the step length in log space.
    const double len = std::hypot(dir[0], dir[1]);
    double t = len > 2.0 ? 2.0 / len : 1.0;
    std::array<double, 2> xn{};
    double fn = 0.0;
    bool ok = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      xn = {x[0] + t * dir[0], x[1] + t * dir[1]};
      fn = objective(xn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * t * slope) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      if (gnorm < 1e-6) break;  // flat to working precision
      std::ostringstream msg;
      msg << "P-EB marginal likelihood line search failed at iteration " << it << "; trace:";
      for (const auto& r : fit.trace) msg << " (" << r.shape << ", " << r.rate << ", " << r.log_likelihood << ")";
      throw ConvergenceError(msg.str());
    }
    const auto gn = gradient(xn);
    const std::array<double, 2> s{xn[0] - x[0], xn[1] - x[1]};
    const std::array<double, 2> yv{gn[0] - gx[0], gn[1] - gx[1]};
    const double sy = s[0] * yv[0] + s[1] * yv[1];
    if (sy > 1e-14) {
      // BFGS inverse update: H <- (I - r s y') H (I - r y s') + r s s'.
      const double r = 1.0 / sy;
      const std::array<double, 2> Hy{H[0] * yv[0] + H[1] * yv[1], H[2] * yv[0] + H[3] * yv[1]};
      const double yHy = yv[0] * Hy[0] + yv[1] * Hy[1];
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          H[2 * i + j] += -r * (Hy[i] * s[j] + s[i] * Hy[j]) + (r * r * yHy + r) * s[i] * s[j];
    }
    x = xn;
    fx = fn;
    gx = gn;
    if (x[0] > log_cap) {
      auto b = boundary_fit(h, mean);
      b.iterations = it;
      b.trace = std::move(fit.trace);
      return b;
    }
  }
  if (std::hypot(gx[0], gx[1]) > 1e-6) {
    std::ostringstream msg;
    msg << "P-EB marginal likelihood did not converge; gradient norm " << std::hypot(gx[0], gx[1]);
    throw ConvergenceError(msg.str());
  }
  fit.hyper = {std::exp(x[0]), std::exp(x[1])};
  fit.log_likelihood = -fx * N;
  return fit;
}

double peb_gamma_estimate(GammaHyper hyper, Count y) {
  return (static_cast<double>(y) + hyper.shape) / (1.0 + hyper.rate);
}

// ---------------------------------------------------------------------------

std::string method_name(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::Robbins: return "NP-EB";
    case BaselineMethod::Npmle: return "NP-ML";
    case BaselineMethod::Npmd: return "NP-MD";
    case BaselineMethod::Peb: return "P-EB";
  }
  return "?";
}

BaselineMethod parse_method(const std::string& s) {
  if (s == "robbins" || s == "np-eb" || s == "NP-EB") return BaselineMethod::Robbins;
  if (s == "npmle" || s == "np-ml" || s == "NP-ML") return BaselineMethod::Npmle;
  if (s == "npmd" || s == "np-md" || s == "NP-MD") return BaselineMethod::Npmd;
  if (s == "peb" || s == "p-eb" || s == "P-EB") return BaselineMethod::Peb;
  throw ConfigError("unknown baseline method '" + s + "'");
}

BaselineTable baseline_estimates(const CountHistogram& h, BaselineMethod method,
                                 std::optional<VdmConfig> cfg) {
  if (h.empty()) throw ConfigError("baseline estimates need data");
  BaselineTable t;
  t.method = method;
  switch (method) {
    case BaselineMethod::Robbins:
      for (const auto& [y, n] : h.entries()) t.estimates[y] = robbins_estimate(h, y);
      break;
    case BaselineMethod::Npmle:
    case BaselineMethod::Npmd: {
      VdmConfig c = cfg.value_or(VdmConfig{default_vdm_grid(h)});
      if (!c.grid) c.grid = default_vdm_grid(h);
      const auto fit = method == BaselineMethod::Npmle ? npmle_vdm(h, c) : npmd_hellinger(h, c);
      for (const auto& [y, n] : h.entries()) t.estimates[y] = qb_estimate(fit.weights, y);
      t.objective = fit.objective_trace.back();
      t.converged = fit.converged;
      break;
    }
    case BaselineMethod::Peb: {
      const auto fit = peb_gamma_fit(h);
      for (const auto& [y, n] : h.entries()) t.estimates[y] = peb_gamma_estimate(fit.hyper, y);
      t.objective = fit.log_likelihood;
      t.converged = !fit.boundary;
      break;
    }
  }
  return t;
}

std::string baseline_csv(const std::vector<BaselineTable>& tables, bool header) {
  std::ostringstream os;
  os << std::setprecision(10);
  if (header) os << "y,method,estimate\n";
  for (const auto& t : tables)
    for (const auto& [y, v] : t.estimates) os << y << ',' << method_name(t.method) << ',' << v << '\n';
  return os.str();
}

std::string baseline_markdown(const CountHistogram& h, const std::vector<BaselineTable>& tables) {
  std::ostringstream os;
  os << "| |";
  for (const auto& [y, n] : h.entries()) os << ' ' << y << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < h.entries().size(); ++i) os << "---|";
  os << "\n| Counts |";
  for (const auto& [y, n] : h.entries()) os << ' ' << n << " |";
  os << '\n' << std::fixed << std::setprecision(2);
  for (const auto& t : tables) {
    os << "| " << method_name(t.method) << " |";
    for (const auto& [y, n] : h.entries()) {
      auto it = t.estimates.find(y);
      if (it == t.estimates.end()) os << " - |";
      else os << ' ' << it->second << " |";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace qbeb
