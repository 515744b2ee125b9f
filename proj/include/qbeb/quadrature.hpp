#pragma once

#include <cstddef>
#include <vector>

namespace qbeb {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussLegendreRule gauss_legendre(std::size_t order);

/// Composite rule on [a, b]: `panels` equal panels with `order` nodes each.
/// The returned weights already include the panel Jacobian.
GaussLegendreRule composite_gauss_legendre(double a, double b, std::size_t panels,
                                           std::size_t order);

template <class F>
double integrate(F&& f, double a, double b, std::size_t panels = 200, std::size_t order = 20) {
  const auto rule = composite_gauss_legendre(a, b, panels, order);
  double s = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * f(rule.nodes[i]);
  return s;
}

}  // namespace qbeb
