#pragma once

// Modified Crank-Nicolson schemes for v_t = v_xx with Dirichlet data: the first
// step is a damped half step V^1 - V^0 = (dtau/2) d^2 V^1, every later step is
// plain Crank-Nicolson. Per mode of eigenvalue mu the m-step factor is
//   r_m(mu) = (1 - rho)^{m-1} / (1 + rho)^m,  rho = dtau mu / 2,
// which is also the propagator of the stochastic Crank-Nicolson scheme.

#include "stochheat/fem1d.hpp"
#include "stochheat/spectral_core.hpp"

#include <cmath>
#include <vector>

namespace stochheat {

/// r_m(mu); evaluated as ((1-rho)/(1+rho))^{m-1} / (1+rho) to avoid overflow.
inline double amplification(double mu, int m, double dtau) {
  detail::require(mu >= 0.0, "amplification: eigenvalue must be non-negative");
  detail::require(m >= 1, "amplification: step count must be >= 1");
  detail::require(dtau > 0.0, "amplification: dtau must be positive");
  const double rho = 0.5 * dtau * mu;
  return std::pow((1.0 - rho) / (1.0 + rho), m - 1) / (1.0 + rho);
}

/// r_1(mu) .. r_M(mu) by repeated multiplication with the CN step factor.
inline Vector amplification_sequence(double mu, int M, double dtau) {
  const double rho = 0.5 * dtau * mu;
  const double step = (1.0 - rho) / (1.0 + rho);
  Vector r(M);
  double value = 1.0 / (1.0 + rho);
  for (int m = 0; m < M; ++m) {
    r(m) = value;
    value *= step;
  }
  return r;
}

/// Time levels tau_m = m dtau, m = 0..M, with one state per level.
template <class State> struct Trajectory {
  double dtau = 0.0;
  std::vector<State> states;

  int steps() const { return static_cast<int>(states.size()) - 1; }
  double time(int m) const { return m * dtau; }
  const State &operator[](int m) const { return states[static_cast<std::size_t>(m)]; }
};

using SpectralTrajectory = Trajectory<SpectralField>;
using NodalTrajectory = Trajectory<Vector>;

inline SpectralTrajectory modified_cn_spectral(const SpectralField &v0, int M, double dtau) {
  detail::require(M >= 1, "modified_cn_spectral: M must be >= 1");
  detail::require(dtau > 0.0, "modified_cn_spectral: dtau must be positive");
  SpectralTrajectory traj{dtau, {v0}};
  traj.states.reserve(static_cast<std::size_t>(M) + 1);
  Vector c = v0.coeffs();
  for (int m = 1; m <= M; ++m) {
    for (int k = 1; k <= v0.size(); ++k) {
      const double rho = 0.5 * dtau * SpectralMode(k).eigenvalue();
      c(k - 1) = (m == 1) ? c(k - 1) / (1.0 + rho) : c(k - 1) * (1.0 - rho) / (1.0 + rho);
    }
    traj.states.emplace_back(c);
  }
  return traj;
}

/// V_h^0 given; (M + dtau/2 S) V^1 = M V^0, then (M + dtau/2 S) V^m = (M - dtau/2 S) V^{m-1}.
inline NodalTrajectory modified_cn_fem(const Vector &v0_nodal, const FemSystem &sys, int M,
                                       double dtau) {
  detail::require(M >= 1, "modified_cn_fem: M must be >= 1");
  detail::require(dtau > 0.0, "modified_cn_fem: dtau must be positive");
  detail::require(v0_nodal.size() == sys.dimension(), "modified_cn_fem: size mismatch");
  const Tridiagonal lhs = Tridiagonal::combine(1.0, sys.mass, 0.5 * dtau, sys.stiffness);
  const Tridiagonal rhs = Tridiagonal::combine(1.0, sys.mass, -0.5 * dtau, sys.stiffness);
  NodalTrajectory traj{dtau, {v0_nodal}};
  traj.states.reserve(static_cast<std::size_t>(M) + 1);
  for (int m = 1; m <= M; ++m) {
    const Vector &prev = traj.states.back();
    const Vector b = (m == 1) ? sys.mass.multiply(prev) : rhs.multiply(prev);
    traj.states.push_back(lhs.solve(b));
  }
  return traj;
}

/// Starts from V_h^0 = P_h v0.
inline NodalTrajectory modified_cn_fem(const SpectralField &v0, const FemSystem &sys, int M,
                                       double dtau) {
  return modified_cn_fem(l2_project(v0, sys), sys, M, dtau);
}

/// v(t) = S(t) v0.
inline SpectralField exact_heat_solution(const SpectralField &v0, double t) {
  return semigroup_apply(t, v0);
}

inline SpectralTrajectory exact_heat_trajectory(const SpectralField &v0, int M, double dtau) {
  SpectralTrajectory traj{dtau, {}};
  for (int m = 0; m <= M; ++m)
    traj.states.push_back(exact_heat_solution(v0, m * dtau));
  return traj;
}

// ---------------------------------------------------------------------------
// Discrete-in-time L^2(L^2) distances.

enum class TimeNorm {
  nodal,          ///< (dtau sum_{m=1}^M ||A^m - B^m||^2)^{1/2}
  midpoint,       ///< same with time averages A^{m-1/2} = (A^m + A^{m-1}) / 2
  damped_midpoint ///< nodal at m = 1, midpoint averages for m >= 2
};

namespace detail {

/// `dist2(a, b)` must return ||a - b||^2 for a pair of states; the
/// midpoint variants rely on linearity, so they pass averaged states.
template <class StateA, class StateB, class AvgA, class AvgB, class Dist2>
double time_norm_error(const Trajectory<StateA> &a, const Trajectory<StateB> &b, TimeNorm norm,
                       AvgA &&average_a, AvgB &&average_b, Dist2 &&dist2) {
  require(a.steps() == b.steps() && a.steps() >= 1, "l2t_error: mismatched time grids");
  require(std::abs(a.dtau - b.dtau) <= 1e-14 * a.dtau, "l2t_error: mismatched time steps");
  double sum = 0.0;
  for (int m = 1; m <= a.steps(); ++m) {
    const bool use_nodal = norm == TimeNorm::nodal || (norm == TimeNorm::damped_midpoint && m == 1);
    if (use_nodal)
      sum += dist2(a[m], b[m]);
    else
      sum += dist2(average_a(a[m], a[m - 1]), average_b(b[m], b[m - 1]));
  }
  return std::sqrt(a.dtau * sum);
}

} // namespace detail

inline double l2t_error(const SpectralTrajectory &a, const SpectralTrajectory &b,
                        TimeNorm norm = TimeNorm::nodal) {
  auto avg = [](const SpectralField &x, const SpectralField &y) { return 0.5 * (x + y); };
  auto dist2 = [](const SpectralField &x, const SpectralField &y) {
    const double d = (x - y).l2_norm();
    return d * d;
  };
  return detail::time_norm_error(a, b, norm, avg, avg, dist2);
}

inline double l2t_error(const NodalTrajectory &a, const NodalTrajectory &b, const FemSystem &sys,
                        TimeNorm norm = TimeNorm::nodal) {
  auto avg = [](const Vector &x, const Vector &y) -> Vector { return 0.5 * (x + y); };
  auto dist2 = [&](const Vector &x, const Vector &y) { return sys.mass.quadratic_form(x - y); };
  return detail::time_norm_error(a, b, norm, avg, avg, dist2);
}

/// ||sum_k c_k eps_k - v_h||^2, exact through the sine/hat Gram matrix.
inline double spectral_nodal_distance2(const SpectralField &f, const Vector &v,
                                       const FemSystem &sys, const Matrix &sine_hat) {
  const double cross = f.coeffs().dot(sine_hat.topRows(f.size()) * v);
  return f.coeffs().squaredNorm() + sys.mass.quadratic_form(v) - 2.0 * cross;
}

/// Spectral vs nodal trajectories; the FEM functions are embedded into L^2(D)
/// with exact sine/hat inner products.
inline double l2t_error(const SpectralTrajectory &a, const NodalTrajectory &b,
                        const FemSystem &sys, TimeNorm norm = TimeNorm::nodal) {
  int K = 1;
  for (const auto &s : a.states)
    K = std::max(K, s.size());
  const Matrix sine_hat = sine_hat_matrix(K, sys.mesh);
  auto avg_a = [](const SpectralField &x, const SpectralField &y) { return 0.5 * (x + y); };
  auto avg_b = [](const Vector &x, const Vector &y) -> Vector { return 0.5 * (x + y); };
  auto dist2 = [&](const SpectralField &x, const Vector &y) {
    return std::max(0.0, spectral_nodal_distance2(x, y, sys, sine_hat));
  };
  return detail::time_norm_error(a, b, norm, avg_a, avg_b, dist2);
}

} // namespace stochheat
