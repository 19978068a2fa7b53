#pragma once

// Mean-square error functionals, evaluated exactly through Gaussian second
// moments, with Monte Carlo counterparts and log-log rate fitting.

#include "stochheat/spde_solvers.hpp"

#include <optional>
#include <string>
#include <vector>

namespace stochheat {

// ---------------------------------------------------------------------------
// Modeling error Z(t) = (E ||u(t) - u^(t)||^2)^{1/2}.

struct ModelingError {
  double value = 0.0;
  double tail_estimate = 0.0; // bound on the squared contribution of modes k > K
  std::optional<std::string> warning;
};

/// Squared contribution of mode k: the kernel norm minus the norm of its cell average.
inline double modeling_error_mode(int k, double t, const NoiseDims &dims) {
  const double mu = SpectralMode(k).eigenvalue();
  const double full = -std::expm1(-2.0 * mu * t) / (2.0 * mu);
  const double averaged =
      time_overlap_square_sum(k, t, dims) / dims.dt() * cell_weight_square_sum(k, dims.j_star) / dims.dx();
  return full - averaged;
}

inline ModelingError modeling_error_exact(double t, const NoiseDims &dims, int K,
                                          double tail_tolerance = 1e-8) {
  dims.validate();
  detail::require(K >= 1, "modeling_error_exact: K must be >= 1");
  detail::require_domain(t >= 0.0 && t <= dims.horizon * (1.0 + 1e-14),
                         "modeling_error_exact: t outside [0, T]");
  ModelingError out;
  if (t == 0.0)
    return out;
  double sum = 0.0;
  for (int k = 1; k <= K; ++k)
    sum += std::max(0.0, modeling_error_mode(k, t, dims));
  out.value = std::sqrt(sum);
  out.tail_estimate = 0.5 * tail_bound(K, 2.0);
  if (out.tail_estimate > tail_tolerance)
    out.warning = "modeling error: truncation tail " + std::to_string(out.tail_estimate) +
                  " exceeds tolerance " + std::to_string(tail_tolerance);
  return out;
}

// ---------------------------------------------------------------------------
// Discretization errors. All three are norms of coupled differences of the
// K-mode spectral objects and the finite element solution, so the triangle
// inequality between them is exact.

namespace detail {

inline double clamp_sqrt(double x) { return std::sqrt(std::max(0.0, x)); }

/// E || sum_k (A b)_k eps_k ||^2 for separable coefficients A (K x N), b (K x J).
inline double spectral_moment(const Matrix &A, const Matrix &b, const NoiseDims &dims) {
  const Vector B = b.rowwise().squaredNorm();
  return B.dot(A.rowwise().squaredNorm()) / dims.cell_area();
}

/// E || spectral(A, b) - fem(Ah, g) ||^2 with g_pj = int_{D_j} phi_p.
inline double spectral_fem_moment(const Matrix &A, const Matrix &b, const Matrix &Ah,
                                  const FemEigenBasis &basis, const Mesh &mesh,
                                  const NoiseDims &dims) {
  const Matrix g = basis.vectors.transpose() * hat_cell_matrix(mesh, dims.j_star);
  const Vector G = g.rowwise().squaredNorm();
  const Matrix E = sine_hat_matrix(static_cast<int>(A.rows()), mesh) * basis.vectors;
  const Matrix C = b * g.transpose();
  const Matrix AAh = A * Ah.transpose();
  const double cross = E.cwiseProduct(C).cwiseProduct(AAh).sum();
  return spectral_moment(A, b, dims) + G.dot(Ah.rowwise().squaredNorm()) / dims.cell_area() -
         2.0 * cross / dims.cell_area();
}

inline void require_step(int m, int M) {
  require(M >= 1 && m >= 0 && m <= M, "error functional: step index out of range");
}

} // namespace detail

/// (E ||P_K u^(tau_m) - U^m||^2)^{1/2}.
inline double tdr_error_exact(int m, const NoiseDims &dims, int M, int K) {
  dims.validate();
  detail::require_step(m, M);
  const double tau = m * dims.horizon / M;
  const Matrix D = regularized_time_factors(K, tau, dims) -
                   propagated_time_factors(sine_eigenvalues(K), m, M, dims);
  return detail::clamp_sqrt(detail::spectral_moment(D, mode_cell_weights(K, dims.j_star).b, dims));
}

/// (E ||U^m - U_h^m||^2)^{1/2}.
inline double sdr_error_exact(int m, const NoiseDims &dims, int M, const FemSystem &sys, int K) {
  dims.validate();
  detail::require_step(m, M);
  const FemEigenBasis basis = generalized_eigen(sys);
  const Matrix A = propagated_time_factors(sine_eigenvalues(K), m, M, dims);
  const Matrix Ah = propagated_time_factors(basis.values, m, M, dims);
  return detail::clamp_sqrt(detail::spectral_fem_moment(A, mode_cell_weights(K, dims.j_star).b, Ah,
                                                        basis, sys.mesh, dims));
}

/// (E ||P_K u^(tau_m) - U_h^m||^2)^{1/2}.
inline double total_error_exact(int m, const NoiseDims &dims, int M, const FemSystem &sys, int K) {
  dims.validate();
  detail::require_step(m, M);
  const FemEigenBasis basis = generalized_eigen(sys);
  const Matrix A = regularized_time_factors(K, m * dims.horizon / M, dims);
  const Matrix Ah = propagated_time_factors(basis.values, m, M, dims);
  return detail::clamp_sqrt(detail::spectral_fem_moment(A, mode_cell_weights(K, dims.j_star).b, Ah,
                                                        basis, sys.mesh, dims));
}

// ---------------------------------------------------------------------------
// Monte Carlo.

struct McEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

/// Sample mean of ||X - Y||^2 with its standard error; sample i uses seed base ^ i.
inline McEstimate mc_error(const ObservableSpec &x, const ObservableSpec &y, const NoiseDims &dims,
                           int samples, std::uint64_t base_seed) {
  detail::require(samples >= 2, "mc_error: at least two samples are required");
  std::optional<FemSystem> sys;
  if (x.kind == ObservableKind::fem)
    sys = assemble(*x.mesh);
  if (y.kind == ObservableKind::fem) {
    detail::require(!sys || *x.mesh == *y.mesh, "mc_error: finite element meshes differ");
    sys = assemble(*y.mesh);
  }
  double mean = 0.0;
  double m2 = 0.0;
  for (int i = 0; i < samples; ++i) {
    const NoiseGrid grid = sample(dims, base_seed ^ static_cast<std::uint64_t>(i));
    const double d2 = distance2(evaluate_observable(x, grid), evaluate_observable(y, grid),
                                sys ? &*sys : nullptr);
    const double delta = d2 - mean;
    mean += delta / (i + 1);
    m2 += delta * (d2 - mean);
  }
  const double variance = m2 / (samples - 1);
  return {mean, std::sqrt(variance / samples)};
}

// ---------------------------------------------------------------------------
// Rates.

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0; // max |log e_i - (intercept + slope log r_i)|
};

struct RatePoint {
  double resolution;
  double error;
};

/// Least squares on (log resolution, log error).
inline RateFit fit_rate(const std::vector<RatePoint> &points) {
  detail::require(points.size() >= 3, "fit_rate: at least three points are required");
  const auto n = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0;
  for (const auto &p : points) {
    detail::require(p.resolution > 0.0 && p.error > 0.0, "fit_rate: inputs must be positive");
    sx += std::log(p.resolution);
    sy += std::log(p.error);
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto &p : points) {
    const double dx = std::log(p.resolution) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(p.error) - my);
  }
  detail::require(sxx > 0.0, "fit_rate: resolutions must not all coincide");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  for (const auto &p : points)
    fit.residual = std::max(
        fit.residual, std::abs(std::log(p.error) - (fit.intercept + fit.slope * std::log(p.resolution))));
  return fit;
}

// ---------------------------------------------------------------------------
// Reports.

struct ErrorRow {
  int level = 0;
  std::optional<double> dt, dx, dtau, h;
  std::optional<int> K;
  double error_exact = 0.0;
  std::optional<double> error_mc, stderr_mc;
  double resolution = 0.0; // the swept parameter
};

struct ErrorReport {
  std::string study;
  std::vector<ErrorRow> rows;
  RateFit fit;
  int window_first = 0; // index of the first row in the fit window
  int window_size = 0;

  /// Fits over rows [first, first + size).
  void refit(int first, int size) {
    detail::require(first >= 0 && size >= 3 && first + size <= static_cast<int>(rows.size()),
                    "ErrorReport: invalid fit window");
    std::vector<RatePoint> pts;
    for (int i = first; i < first + size; ++i)
      pts.push_back({rows[static_cast<std::size_t>(i)].resolution,
                     rows[static_cast<std::size_t>(i)].error_exact});
    fit = fit_rate(pts);
    window_first = first;
    window_size = size;
  }
};

} // namespace stochheat
