#include "qbeb/priors.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

#include "qbeb/errors.hpp"
#include "qbeb/numeric.hpp"
#include "qbeb/quadrature.hpp"

namespace qbeb {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse number '" + item + "' in prior spec");
    }
    if (used != item.size()) throw ConfigError("trailing characters in '" + item + "'");
    out.push_back(v);
  }
  return out;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

PriorSpec::PriorSpec(Family family) : family_(std::move(family)) {
  std::visit(
      Overloaded{
          [](const WeibullPrior& p) {
            require(p.shape > 0 && p.scale > 0, "weibull prior needs shape, scale > 0");
          },
          [](const UniformPrior& p) {
            require(p.lo >= 0 && p.hi > p.lo, "uniform prior needs 0 <= lo < hi");
          },
          [](const HalfGaussianPrior& p) { require(p.sigma > 0, "half-gaussian needs sigma > 0"); },
          [](AtomsPrior& p) {
            require(!p.atoms.empty(), "atoms prior needs at least one atom");
            if (p.weights.empty())
              p.weights.assign(p.atoms.size(), 1.0 / static_cast<double>(p.atoms.size()));
            require(p.weights.size() == p.atoms.size(), "atoms and weights differ in length");
            double sum = 0.0;
            for (std::size_t j = 0; j < p.atoms.size(); ++j) {
              require(p.atoms[j] > 0, "atoms must be > 0");
              require(j == 0 || p.atoms[j] > p.atoms[j - 1], "atoms must be increasing");
              require(p.weights[j] >= 0, "atom weights must be >= 0");
              sum += p.weights[j];
            }
            require(sum > 0, "atom weights have zero mass");
            for (double& w : p.weights) w /= sum;
          },
          [](const GammaPrior& p) { require(p.shape > 0 && p.rate > 0, "gamma needs shape, rate > 0"); },
      },
      family_);
}

PriorSpec PriorSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (head == "weibull") {
    auto v = parse_list(rest);
    require(v.size() == 2, "weibull:shape,scale");
    return PriorSpec(WeibullPrior{v[0], v[1]});
  }
  if (head == "uniform") {
    auto v = parse_list(rest);
    require(v.size() == 2, "uniform:lo,hi");
    return PriorSpec(UniformPrior{v[0], v[1]});
  }
  if (head == "half-gaussian") {
    auto v = parse_list(rest);
    require(v.size() <= 1, "half-gaussian[:sigma]");
    return PriorSpec(HalfGaussianPrior{v.empty() ? 1.0 : v[0]});
  }
  if (head == "gamma") {
    auto v = parse_list(rest);
    require(v.size() == 2, "gamma:shape,rate");
    return PriorSpec(GammaPrior{v[0], v[1]});
  }
  if (head == "atoms") {
    const auto at = rest.find('@');
    AtomsPrior p;
    p.atoms = parse_list(rest.substr(0, at));
    if (at != std::string::npos) p.weights = parse_list(rest.substr(at + 1));
    return PriorSpec(std::move(p));
  }
  throw ConfigError("unknown prior family '" + head + "'");
}

PriorSpec PriorSpec::from_weights(const MixingWeights& g) {
  const auto pts = g.grid().points();
  const auto w = g.weights();
  return PriorSpec(AtomsPrior{{pts.begin(), pts.end()}, {w.begin(), w.end()}});
}

std::string PriorSpec::name() const {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const WeibullPrior& p) { os << "weibull:" << p.shape << ',' << p.scale; },
                 [&](const UniformPrior& p) { os << "uniform:" << p.lo << ',' << p.hi; },
                 [&](const HalfGaussianPrior& p) { os << "half-gaussian:" << p.sigma; },
                 [&](const AtomsPrior& p) { os << "atoms:" << p.atoms.size(); },
                 [&](const GammaPrior& p) { os << "gamma:" << p.shape << ',' << p.rate; },
             },
             family_);
  return os.str();
}

double PriorSpec::cdf(double x) const {
  return std::visit(
      Overloaded{
          [&](const WeibullPrior& p) {
            return x <= 0 ? 0.0 : -std::expm1(-std::pow(x / p.scale, p.shape));
          },
          [&](const UniformPrior& p) { return std::clamp((x - p.lo) / (p.hi - p.lo), 0.0, 1.0); },
          [&](const HalfGaussianPrior& p) {
            return x <= 0 ? 0.0 : std::erf(x / (p.sigma * std::numbers::sqrt2));
          },
          [&](const AtomsPrior& p) {
            double c = 0.0;
            for (std::size_t j = 0; j < p.atoms.size() && p.atoms[j] <= x; ++j) c += p.weights[j];
            return std::min(c, 1.0);
          },
          [&](const GammaPrior& p) {
            return x <= 0 ? 0.0 : boost::math::gamma_p(p.shape, p.rate * x);
          },
      },
      family_);
}

double PriorSpec::pdf(double x) const {
  return std::visit(
      Overloaded{
          [&](const WeibullPrior& p) {
            if (x <= 0) return 0.0;
            const double z = x / p.scale;
            return p.shape / p.scale * std::pow(z, p.shape - 1) * std::exp(-std::pow(z, p.shape));
          },
          [&](const UniformPrior& p) { return (x >= p.lo && x <= p.hi) ? 1.0 / (p.hi - p.lo) : 0.0; },
          [&](const HalfGaussianPrior& p) {
            if (x < 0) return 0.0;
            const double z = x / p.sigma;
            return 2.0 / (p.sigma * std::sqrt(2.0 * std::numbers::pi)) * std::exp(-0.5 * z * z);
          },
          [&](const AtomsPrior&) -> double {
            throw DomainError("discrete prior has no density");
          },
          [&](const GammaPrior& p) {
            if (x <= 0) return 0.0;
            return std::exp(p.shape * std::log(p.rate) + (p.shape - 1) * std::log(x) - p.rate * x -
                            std::lgamma(p.shape));
          },
      },
      family_);
}

double PriorSpec::sample(std::mt19937_64& rng) const {
  return std::visit(
      Overloaded{
          [&](const WeibullPrior& p) {
            return std::weibull_distribution<double>(p.shape, p.scale)(rng);
          },
          [&](const UniformPrior& p) {
            return std::uniform_real_distribution<double>(p.lo, p.hi)(rng);
          },
          [&](const HalfGaussianPrior& p) {
            std::normal_distribution<double> z(0.0, 1.0);
            for (;;) {
              const double v = z(rng);
              if (v != 0.0) return p.sigma * std::abs(v);
            }
          },
          [&](const AtomsPrior& p) {
            std::discrete_distribution<std::size_t> pick(p.weights.begin(), p.weights.end());
            return p.atoms[pick(rng)];
          },
          [&](const GammaPrior& p) {
            return std::gamma_distribution<double>(p.shape, 1.0 / p.rate)(rng);
          },
      },
      family_);
}

double PriorSpec::mean() const {
  return std::visit(
      Overloaded{
          [](const WeibullPrior& p) { return p.scale * std::tgamma(1.0 + 1.0 / p.shape); },
          [](const UniformPrior& p) { return 0.5 * (p.lo + p.hi); },
          [](const HalfGaussianPrior& p) { return p.sigma * std::sqrt(2.0 / std::numbers::pi); },
          [](const AtomsPrior& p) {
            double m = 0.0;
            for (std::size_t j = 0; j < p.atoms.size(); ++j) m += p.atoms[j] * p.weights[j];
            return m;
          },
          [](const GammaPrior& p) { return p.shape / p.rate; },
      },
      family_);
}

double PriorSpec::second_moment() const {
  return std::visit(
      Overloaded{
          [](const WeibullPrior& p) { return p.scale * p.scale * std::tgamma(1.0 + 2.0 / p.shape); },
          [](const UniformPrior& p) { return (p.hi * p.hi + p.hi * p.lo + p.lo * p.lo) / 3.0; },
          [](const HalfGaussianPrior& p) { return p.sigma * p.sigma; },
          [](const AtomsPrior& p) {
            double m = 0.0;
            for (std::size_t j = 0; j < p.atoms.size(); ++j) m += p.atoms[j] * p.atoms[j] * p.weights[j];
            return m;
          },
          [](const GammaPrior& p) { return p.shape * (p.shape + 1.0) / (p.rate * p.rate); },
      },
      family_);
}

std::pair<double, double> PriorSpec::effective_support() const {
  return std::visit(
      Overloaded{
          [](const WeibullPrior& p) {
            return std::pair{0.0, p.scale * std::pow(-std::log(1e-17), 1.0 / p.shape)};
          },
          [](const UniformPrior& p) { return std::pair{p.lo, p.hi}; },
          [](const HalfGaussianPrior& p) { return std::pair{0.0, 8.6 * p.sigma}; },
          [](const AtomsPrior& p) { return std::pair{p.atoms.front(), p.atoms.back()}; },
          [](const GammaPrior& p) {
            return std::pair{0.0, boost::math::gamma_q_inv(p.shape, 1e-17) / p.rate};
          },
      },
      family_);
}

std::vector<double> PriorSpec::marginal_pmf(Count y_max, std::size_t nodes) const {
  std::vector<double> out(y_max + 1, 0.0);
  if (const auto* atoms = std::get_if<AtomsPrior>(&family_)) {
    for (Count y = 0; y <= y_max; ++y) {
      double s = 0.0;
      for (std::size_t j = 0; j < atoms->atoms.size(); ++j)
        if (atoms->weights[j] > 0)
          s += atoms->weights[j] * std::exp(log_poisson_kernel(y, atoms->atoms[j]));
      out[y] = s;
    }
    return out;
  }
  if (const auto* gam = std::get_if<GammaPrior>(&family_)) {
    const double a = gam->shape, b = gam->rate;
    for (Count y = 0; y <= y_max; ++y) {
      const double yd = static_cast<double>(y);
      out[y] = std::exp(std::lgamma(yd + a) - std::lgamma(a) - std::lgamma(yd + 1.0) +
                        a * std::log(b / (1.0 + b)) - yd * std::log1p(b));
    }
    return out;
  }
  const auto [lo, hi] = effective_support();
  const std::size_t order = 20;
  const auto rule = composite_gauss_legendre(lo, hi, std::max<std::size_t>(1, nodes / order), order);
  std::vector<double> log_fact(y_max + 1);
  for (Count y = 0; y <= y_max; ++y) log_fact[y] = std::lgamma(static_cast<double>(y) + 1.0);
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double t = rule.nodes[i];
    const double dens = pdf(t);
    if (!(dens > 0)) continue;
    const double lw = std::log(rule.weights[i] * dens);
    const double lt = std::log(t);
    for (Count y = 0; y <= y_max; ++y) {
      const double yd = static_cast<double>(y);
      out[y] += std::exp(lw - t + yd * lt - log_fact[y]);
    }
  }
  return out;
}

}  // namespace qbeb
