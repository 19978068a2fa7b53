#pragma once

#include "stochheat/core.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <vector>

namespace stochheat {

/// Nodes and weights of a composite rule on [a, b].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  template <class F> double integrate(F &&f) const {
    double sum = 0.0;
    for (std::size_t q = 0; q < nodes.size(); ++q)
      sum += weights[q] * f(nodes[q]);
    return sum;
  }
};

namespace detail {

template <unsigned Points>
void append_gauss(QuadratureRule &rule, double a, double b) {
  using gauss = boost::math::quadrature::gauss<double, Points>;
  const auto &abscissa = gauss::abscissa();
  const auto &weights = gauss::weights();
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  // Boost stores the non-negative half of the symmetric rule.
  for (std::size_t i = 0; i < abscissa.size(); ++i) {
    const double x = abscissa[i];
    const double w = weights[i];
    if (x == 0.0) {
      rule.nodes.push_back(mid);
      rule.weights.push_back(half * w);
    } else {
      rule.nodes.push_back(mid - half * x);
      rule.weights.push_back(half * w);
      rule.nodes.push_back(mid + half * x);
      rule.weights.push_back(half * w);
    }
  }
}

} // namespace detail

/// Composite Gauss-Legendre rule with `Points` nodes on each of `panels`
/// equal subintervals of [a, b].
template <unsigned Points = 8>
QuadratureRule composite_gauss(double a, double b, int panels) {
  detail::require(panels >= 1, "composite_gauss: panels must be >= 1");
  QuadratureRule rule;
  rule.nodes.reserve(static_cast<std::size_t>(panels) * Points);
  rule.weights.reserve(static_cast<std::size_t>(panels) * Points);
  const double width = (b - a) / panels;
  for (int p = 0; p < panels; ++p)
    detail::append_gauss<Points>(rule, a + p * width, (p + 1 == panels) ? b : a + (p + 1) * width);
  return rule;
}

/// Composite Gauss-Legendre rule on [a, b] whose panels shrink geometrically
/// (ratio 1/2) toward b, down to width `min_width`. Resolves boundary layers
/// of the form exp(-c (b - s)).
template <unsigned Points = 8>
QuadratureRule graded_gauss(double a, double b, double min_width) {
  detail::require(b > a && min_width > 0.0, "graded_gauss: invalid interval");
  QuadratureRule rule;
  double left = b;
  double width = min_width;
  while (left - width > a) {
    detail::append_gauss<Points>(rule, left - width, left);
    left -= width;
    width *= 2.0;
  }
  detail::append_gauss<Points>(rule, a, left);
  return rule;
}

/// Default rule for cross-checks on D = (0, 1): 8 points on 256 panels.
inline const QuadratureRule &unit_interval_rule() {
  static const QuadratureRule rule = composite_gauss<8>(0.0, 1.0, 256);
  return rule;
}

} // namespace stochheat
