#pragma once

// Reference computations for the self-test and the acceptance suite. The
// quadrature oracles touch only the kernel itself, never the cell formulas.

#include "stochheat/error_lab.hpp"
#include "stochheat/quadrature.hpp"

#include <vector>

namespace stochheat::verification {

/// Resolution of the (s, y) rules used by the brute-force modeling error.
struct OracleResolution {
  double min_time_panel = 1e-10; // smallest panel next to the kernel's singular end
  int space_panels_per_cell = 128;
  int x_points = 256;            // trapezoid in x, full three-dimensional variant only
};

namespace detail {

/// Quadrature rules per noise cell: time rules graded toward min(t, t_n),
/// plus a plain rule on the part of T_n after t where the kernel vanishes.
struct CellRules {
  std::vector<QuadratureRule> active;   // s in (t_{n-1}, min(t, t_n))
  std::vector<QuadratureRule> inactive; // s in (t, t_n), possibly empty
  std::vector<QuadratureRule> space;    // y in D_j
};

inline CellRules cell_rules(double t, const NoiseDims &dims, const OracleResolution &res) {
  CellRules rules;
  for (int n = 1; n <= dims.n_star; ++n) {
    const double lo = dims.time_node(n - 1);
    const double hi = dims.time_node(n);
    const double end = std::clamp(t, lo, hi);
    rules.active.push_back(end > lo ? graded_gauss<8>(lo, end, res.min_time_panel) : QuadratureRule{});
    rules.inactive.push_back(end < hi ? composite_gauss<8>(end, hi, 1) : QuadratureRule{});
  }
  for (int j = 1; j <= dims.j_star; ++j)
    rules.space.push_back(composite_gauss<8>(dims.space_node(j - 1), dims.space_node(j),
                                             res.space_panels_per_cell));
  return rules;
}

/// int_{cell} |f - avg f|^2 for f(s, y) = time(s) * space(y) on one cell,
/// with every integral (including the average) done by tensor quadrature.
template <class F>
double cell_defect(const QuadratureRule &active, const QuadratureRule &inactive,
                   const QuadratureRule &space, double area, F &&f) {
  double integral = 0.0;
  for (std::size_t p = 0; p < active.nodes.size(); ++p)
    for (std::size_t q = 0; q < space.nodes.size(); ++q)
      integral += active.weights[p] * space.weights[q] * f(p, q);
  const double avg = integral / area;
  double defect = 0.0;
  for (std::size_t p = 0; p < active.nodes.size(); ++p)
    for (std::size_t q = 0; q < space.nodes.size(); ++q) {
      const double d = f(p, q) - avg;
      defect += active.weights[p] * space.weights[q] * d * d;
    }
  double inactive_length = 0.0;
  for (double w : inactive.weights)
    inactive_length += w;
  double space_length = 0.0;
  for (double w : space.weights)
    space_length += w;
  return defect + avg * avg * inactive_length * space_length;
}

} // namespace detail

/// Z(t)^2 contribution of mode k, int int |g_k - Pi g_k|^2 ds dy with
/// g_k(s, y) = exp(-lambda_k^2 (t - s)) eps_k(y) 1_{s < t}; tensor quadrature only.
inline double modeling_error_mode_quadrature(int k, double t, const NoiseDims &dims,
                                             const OracleResolution &res = {}) {
  const auto rules = detail::cell_rules(t, dims, res);
  const double mu = SpectralMode(k).eigenvalue();
  double sum = 0.0;
  for (int n = 0; n < dims.n_star; ++n) {
    const auto &active = rules.active[static_cast<std::size_t>(n)];
    std::vector<double> time(active.nodes.size());
    for (std::size_t p = 0; p < time.size(); ++p)
      time[p] = std::exp(-mu * (t - active.nodes[p]));
    for (int j = 0; j < dims.j_star; ++j) {
      const auto &space = rules.space[static_cast<std::size_t>(j)];
      std::vector<double> shape(space.nodes.size());
      for (std::size_t q = 0; q < shape.size(); ++q)
        shape[q] = eigenfunction(k, space.nodes[q]);
      sum += detail::cell_defect(active, rules.inactive[static_cast<std::size_t>(n)], space,
                                 dims.cell_area(),
                                 [&](std::size_t p, std::size_t q) { return time[p] * shape[q]; });
    }
  }
  return sum;
}

/// Z(t) by quadrature in (s, y) per mode; the x integral is carried out by
/// orthonormality of the eps_k.
inline double modeling_error_quadrature(double t, const NoiseDims &dims, int K,
                                        const OracleResolution &res = {}) {
  double sum = 0.0;
  for (int k = 1; k <= K; ++k)
    sum += modeling_error_mode_quadrature(k, t, dims, res);
  return std::sqrt(sum);
}

/// Z(t) by full quadrature in (s, y, x) of the K-mode kernel G_K(t - s, x, y).
/// x uses the uniform trapezoid rule, exact for products eps_k eps_l with
/// k + l < 2 x_points; the kernel is evaluated in batches as E_s diag(eps(x)) E_y.
inline double modeling_error_quadrature_3d(double t, const NoiseDims &dims, int K,
                                           const OracleResolution &res = {}) {
  const auto rules = detail::cell_rules(t, dims, res);
  const int X = res.x_points;
  auto time_matrix = [&](const QuadratureRule &r) {
    Matrix e(static_cast<Eigen::Index>(r.nodes.size()), K);
    for (std::size_t p = 0; p < r.nodes.size(); ++p)
      for (int k = 1; k <= K; ++k)
        e(static_cast<Eigen::Index>(p), k - 1) = std::exp(-SpectralMode(k).eigenvalue() * (t - r.nodes[p]));
    return e;
  };
  auto space_matrix = [&](const QuadratureRule &r) {
    Matrix e(K, static_cast<Eigen::Index>(r.nodes.size()));
    for (int k = 1; k <= K; ++k)
      for (std::size_t q = 0; q < r.nodes.size(); ++q)
        e(k - 1, static_cast<Eigen::Index>(q)) = eigenfunction(k, r.nodes[q]);
    return e;
  };
  std::vector<Matrix> es, ey;
  for (const auto &r : rules.active)
    es.push_back(time_matrix(r));
  for (const auto &r : rules.space)
    ey.push_back(space_matrix(r));

  double sum = 0.0;
  Vector phi(K);
  for (int a = 1; a < X; ++a) {
    const double x = static_cast<double>(a) / X;
    for (int k = 1; k <= K; ++k)
      phi(k - 1) = eigenfunction(k, x);
    for (std::size_t n = 0; n < es.size(); ++n) {
      if (es[n].rows() == 0) {
        // No active part: the kernel vanishes on the whole cell.
        continue;
      }
      const Matrix weighted = es[n] * phi.asDiagonal();
      for (std::size_t j = 0; j < ey.size(); ++j) {
        const Matrix g = weighted * ey[j];
        sum += detail::cell_defect(rules.active[n], rules.inactive[n], rules.space[j], dims.cell_area(),
                                   [&](std::size_t p, std::size_t q) {
                                     return g(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
                                   }) /
               X;
      }
    }
  }
  return std::sqrt(sum);
}

/// Z(t) from the Pythagoras form with explicit sums over cells (no geometric
/// series, no aliasing formula).
inline double modeling_error_direct_sum(double t, const NoiseDims &dims, int K) {
  double sum = 0.0;
  for (int k = 1; k <= K; ++k) {
    const double mu = SpectralMode(k).eigenvalue();
    double time = 0.0;
    for (int n = 1; n <= dims.n_star; ++n)
      time += std::pow(time_overlap_integral(k, n, t, dims), 2);
    double space = 0.0;
    for (int j = 1; j <= dims.j_star; ++j)
      space += std::pow(cell_weight(k, j, dims.j_star), 2);
    sum += -std::expm1(-2.0 * mu * t) / (2.0 * mu) - time / dims.dt() * space / dims.dx();
  }
  return std::sqrt(std::max(0.0, sum));
}

/// Closed-form P1 eigenvalues on a uniform mesh.
inline Vector fem_eigenvalues_closed_form(const Mesh &mesh) {
  Vector mu(mesh.interior_nodes());
  const double h = mesh.h();
  for (int p = 1; p <= mesh.interior_nodes(); ++p) {
    const double c = std::cos(p * pi * h);
    mu(p - 1) = 6.0 / (h * h) * (1.0 - c) / (2.0 + c);
  }
  return mu;
}

} // namespace stochheat::verification
