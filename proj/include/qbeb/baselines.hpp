#pragma once

// Batch comparators: Robbins' f-modeling rule, grid NPMLE and minimum squared
// Hellinger distance fits by vertex direction, and the Gamma-Poisson
// parametric rule with hyperparameters from the marginal likelihood.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qbeb/poisson_model.hpp"

namespace qbeb {

/// Gamma(shape, rate) hyperprior.
struct GammaHyper {
  double shape = 1.0;
  double rate = 1.0;
};

enum class StepRule { ExactLineSearch, Armijo };

struct VdmConfig {
  GridPtr grid;
  int max_iters = 500;
  /// Stop once the duality-gap certificate max_j D_j falls below tol.
  double tol = 1e-8;
  StepRule step_rule = StepRule::ExactLineSearch;

  void validate() const;
};

struct VdmResult {
  MixingWeights weights;
  /// Objective after every iteration: log-likelihood per observation for
  /// NPMLE (non-decreasing), squared Hellinger distance for NPMD
  /// (non-increasing). Entry 0 is the starting point.
  std::vector<double> objective_trace;
  /// NPMLE: max_j sum_y (n_y/N) k(y|theta_j)/p_g(y). NPMD: 1 + the largest
  /// directional derivative of the affinity. Both are <= 1 + tol at a
  /// stationary point.
  double certificate = 0.0;
  int iterations = 0;
  /// False when max_iters ran out; the best iterate is still returned.
  bool converged = false;
};

/// (y + 1) n_{y+1} / n_y. Throws DomainError when n_y == 0.
double robbins_estimate(const CountHistogram& h, Count y);

/// Maximizes sum_y n_y log p_g(y) over mixing weights on cfg.grid.
VdmResult npmle_vdm(const CountHistogram& h, const VdmConfig& cfg);

/// Minimizes 1 - sum_y sqrt(phat(y) p_g(y)) over mixing weights on cfg.grid.
VdmResult npmd_hellinger(const CountHistogram& h, const VdmConfig& cfg);

/// 1000 equispaced points on (0, max(y_max, 1)].
GridPtr default_vdm_grid(const CountHistogram& h, std::size_t points = 1000);

struct PebTraceRow {
  int iteration;
  double shape;
  double rate;
  double log_likelihood;
};

struct PebFit {
  GammaHyper hyper;
  double log_likelihood = 0.0;
  /// Data sit on the Poisson boundary (no overdispersion) or are
  /// degenerate; the returned hyperparameters are a finite safeguard.
  bool boundary = false;
  int iterations = 0;
  std::vector<PebTraceRow> trace;
};

/// Negative-binomial marginal log-likelihood sum_y n_y log NB(y; a, b/(1+b)).
double peb_log_likelihood(const CountHistogram& h, GammaHyper hyper);

/// Gradient of peb_log_likelihood in (log shape, log rate).
std::array<double, 2> peb_log_gradient(const CountHistogram& h, GammaHyper hyper);

/// Marginal maximum likelihood by BFGS on (log shape, log rate). Throws
/// ConvergenceError (with the iteration trace in the message) on failure.
PebFit peb_gamma_fit(const CountHistogram& h);

/// Posterior mean (y + shape) / (1 + rate).
double peb_gamma_estimate(GammaHyper hyper, Count y);

enum class BaselineMethod { Robbins, Npmle, Npmd, Peb };

std::string method_name(BaselineMethod m);
/// Accepts robbins|np-eb, npmle|np-ml, npmd|np-md, peb|p-eb.
BaselineMethod parse_method(const std::string& s);

struct BaselineTable {
  BaselineMethod method = BaselineMethod::Robbins;
  std::map<Count, double> estimates;
  /// Final objective of the fit, when the method has one.
  std::optional<double> objective;
  bool converged = true;
};

/// Applies one method at every observed y. NPMLE/NPMD estimates are posterior
/// means under the fitted weights; `cfg` defaults to default_vdm_grid.
BaselineTable baseline_estimates(const CountHistogram& h, BaselineMethod method,
                                 std::optional<VdmConfig> cfg = std::nullopt);

/// Rows "y,method,estimate".
std::string baseline_csv(const std::vector<BaselineTable>& tables, bool header = true);
/// Methods as rows, y as columns.
std::string baseline_markdown(const CountHistogram& h, const std::vector<BaselineTable>& tables);

}  // namespace qbeb
