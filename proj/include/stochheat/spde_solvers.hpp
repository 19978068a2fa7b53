#pragma once

// Solvers driven by one realization of the piecewise constant noise:
//   - the regularized solution u^(t), exact in time through the heat semigroup;
//   - the Crank-Nicolson time-discrete approximation U^m, per sine mode;
//   - the Crank-Nicolson finite element approximation U_h^m.
// Every observable is linear in the increments R_j^n, which is what the
// coefficient maps below expose.

#include "stochheat/deterministic_cn.hpp"
#include "stochheat/fem1d.hpp"
#include "stochheat/noise_grid.hpp"
#include "stochheat/spectral_core.hpp"

#include <optional>

namespace stochheat {

/// lambda_k^2 for k = 1..K.
inline Vector sine_eigenvalues(int K) {
  Vector mu(K);
  for (int k = 1; k <= K; ++k)
    mu(k - 1) = SpectralMode(k).eigenvalue();
  return mu;
}

/// (W(s, .), eps_k) on each noise time cell: N* x K.
inline Matrix projected_noise_spectral(const NoiseGrid &grid, int K) {
  const CellWeightTable table = mode_cell_weights(K, grid.j_star());
  return grid.increments() * table.b.transpose() / grid.dims().cell_area();
}

/// (W(s, .), hat_i) on each noise time cell: N* x nu_h.
inline Matrix projected_noise_nodal(const NoiseGrid &grid, const Mesh &mesh) {
  return grid.increments() * hat_cell_matrix(mesh, grid.j_star()).transpose() /
         grid.dims().cell_area();
}

/// Per-step loads int_{Delta_m} (W, target) ds, one row per step m = 1..M.
struct StochasticLoad {
  double dtau = 0.0;
  Matrix values; // M x targets

  int steps() const { return static_cast<int>(values.rows()); }
};

namespace detail {

inline StochasticLoad integrate_over_steps(const Matrix &per_cell, const NoiseDims &dims, int M) {
  require(M >= 1, "stochastic load: M must be >= 1");
  StochasticLoad load{dims.horizon / M, Matrix::Zero(M, per_cell.cols())};
  for_each_overlap(M, dims.n_star, dims.horizon, [&](int l, int n, double len) {
    load.values.row(l - 1) += len * per_cell.row(n - 1);
  });
  return load;
}

} // namespace detail

inline StochasticLoad spectral_load(const NoiseGrid &grid, int K, int M) {
  return detail::integrate_over_steps(projected_noise_spectral(grid, K), grid.dims(), M);
}

inline StochasticLoad fem_load(const NoiseGrid &grid, const Mesh &mesh, int M) {
  return detail::integrate_over_steps(projected_noise_nodal(grid, mesh), grid.dims(), M);
}

// ---------------------------------------------------------------------------
// Time kernels: how much of the noise in cell T_n reaches the observable.

/// I_{k,n}(t) for k = 1..K, n = 1..N*: K x N*.
inline Matrix regularized_time_factors(int K, double t, const NoiseDims &dims) {
  Matrix f = Matrix::Zero(K, dims.n_star);
  for (int k = 1; k <= K; ++k)
    for (int n = 1; n <= dims.n_star && dims.time_node(n - 1) < t; ++n)
      f(k - 1, n - 1) = time_overlap_integral(k, n, t, dims);
  return f;
}

/// sum_{l<=m} r_{m-l+1}(mu) |Delta_l cap T_n| for each eigenvalue mu: rows x N*.
inline Matrix propagated_time_factors(const Vector &eigenvalues, int m, int M,
                                      const NoiseDims &dims) {
  detail::require(M >= 1 && m >= 0 && m <= M, "propagated_time_factors: step out of range");
  const double dtau = dims.horizon / M;
  Matrix f = Matrix::Zero(eigenvalues.size(), dims.n_star);
  if (m == 0)
    return f;
  // Overlaps of the first m steps, grouped by step.
  std::vector<std::vector<std::pair<int, double>>> cells(static_cast<std::size_t>(m));
  for_each_overlap(M, dims.n_star, dims.horizon, [&](int l, int n, double len) {
    if (l <= m)
      cells[static_cast<std::size_t>(l - 1)].emplace_back(n, len);
  });
  for (Eigen::Index row = 0; row < eigenvalues.size(); ++row) {
    const Vector r = amplification_sequence(eigenvalues(row), m, dtau);
    for (int l = 1; l <= m; ++l) {
      const double factor = r(m - l);
      for (const auto &[n, len] : cells[static_cast<std::size_t>(l - 1)])
        f(row, n - 1) += factor * len;
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Solvers.

/// u^(t) = int_0^t S(t - s) W(s) ds, exact given the noise grid.
inline SpectralField regularized_exact(const NoiseGrid &grid, int K, double t) {
  detail::require(K >= 1, "regularized_exact: K must be >= 1");
  detail::require_domain(t >= 0.0 && t <= grid.horizon() * (1.0 + 1e-14),
                         "regularized_exact: t outside [0, T]");
  const Matrix per_cell = projected_noise_spectral(grid, K); // N x K
  const Matrix time = regularized_time_factors(K, t, grid.dims());
  Vector c(K);
  for (int k = 0; k < K; ++k)
    c(k) = time.row(k).dot(per_cell.col(k));
  return SpectralField(std::move(c));
}

/// (1 + rho_k) U_k^m = (1 - rho_k) U_k^{m-1} + w_k^m, U^0 = 0.
inline SpectralTrajectory cn_time_discrete(const NoiseGrid &grid, int K, int M) {
  const StochasticLoad load = spectral_load(grid, K, M);
  const Vector mu = sine_eigenvalues(K);
  SpectralTrajectory traj{load.dtau, {SpectralField::zeros(K)}};
  traj.states.reserve(static_cast<std::size_t>(M) + 1);
  Vector u = Vector::Zero(K);
  for (int m = 1; m <= M; ++m) {
    for (int k = 0; k < K; ++k) {
      const double rho = 0.5 * load.dtau * mu(k);
      u(k) = ((1.0 - rho) * u(k) + load.values(m - 1, k)) / (1.0 + rho);
    }
    traj.states.emplace_back(u);
  }
  return traj;
}

/// (M + dtau/2 S) U^m = (M - dtau/2 S) U^{m-1} + b^m, U^0 = 0.
inline NodalTrajectory cn_fem_spde(const NoiseGrid &grid, const FemSystem &sys, int M) {
  const StochasticLoad load = fem_load(grid, sys.mesh, M);
  const Tridiagonal lhs = Tridiagonal::combine(1.0, sys.mass, 0.5 * load.dtau, sys.stiffness);
  const Tridiagonal rhs = Tridiagonal::combine(1.0, sys.mass, -0.5 * load.dtau, sys.stiffness);
  NodalTrajectory traj{load.dtau, {Vector::Zero(sys.dimension())}};
  traj.states.reserve(static_cast<std::size_t>(M) + 1);
  for (int m = 1; m <= M; ++m) {
    const Vector b = rhs.multiply(traj.states.back()) + load.values.row(m - 1).transpose();
    traj.states.push_back(lhs.solve(b));
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Observables and their Gaussian coefficient maps.

enum class ObservableKind { zero, regularized, time_discrete, fem };

/// Which linear functional of the noise to look at.
struct ObservableSpec {
  ObservableKind kind = ObservableKind::zero;
  double horizon = 1.0;
  int modes = 0;  // sine truncation K (regularized, time_discrete)
  int steps = 0;  // M
  int step = 0;   // m
  double time = 0.0; // t for the regularized solution
  std::optional<Mesh> mesh;

  static ObservableSpec zero(double horizon) {
    return {ObservableKind::zero, horizon, 0, 0, 0, 0.0, std::nullopt};
  }
  static ObservableSpec regularized(double t, int K, double horizon) {
    return {ObservableKind::regularized, horizon, K, 0, 0, t, std::nullopt};
  }
  static ObservableSpec time_discrete(int m, int M, int K, double horizon) {
    return {ObservableKind::time_discrete, horizon, K, M, m, 0.0, std::nullopt};
  }
  static ObservableSpec fem(int m, int M, Mesh mesh, double horizon) {
    return {ObservableKind::fem, horizon, 0, M, m, 0.0, mesh};
  }
};

/// A function in L^2(D): the sum of a sine part and a finite element part.
struct ObservableValue {
  Vector spectral; // sine coefficients, possibly empty
  Vector nodal;    // interior nodal values, possibly empty
};

/// ||a - b||^2 for observable values; `sys` is required when either has a nodal part.
inline double distance2(const ObservableValue &a, const ObservableValue &b,
                        const FemSystem *sys = nullptr) {
  const Eigen::Index K = std::max(a.spectral.size(), b.spectral.size());
  Vector s = Vector::Zero(K);
  s.head(a.spectral.size()) += a.spectral;
  s.head(b.spectral.size()) -= b.spectral;
  const Eigen::Index nu = std::max(a.nodal.size(), b.nodal.size());
  if (nu == 0)
    return s.squaredNorm();
  detail::require(sys != nullptr && sys->dimension() == nu, "distance2: finite element system required");
  Vector v = Vector::Zero(nu);
  if (a.nodal.size() > 0)
    v += a.nodal;
  if (b.nodal.size() > 0)
    v -= b.nodal;
  double cross = 0.0;
  if (K > 0)
    cross = s.dot(sine_hat_matrix(static_cast<int>(K), sys->mesh) * v);
  return s.squaredNorm() + sys->mass.quadratic_form(v) + 2.0 * cross;
}

/// Evaluates an observable with the stepping solvers.
inline ObservableValue evaluate_observable(const ObservableSpec &spec, const NoiseGrid &grid) {
  detail::require(std::abs(spec.horizon - grid.horizon()) <= 1e-14 * grid.horizon(),
                  "evaluate_observable: inconsistent time horizons");
  switch (spec.kind) {
  case ObservableKind::zero:
    return {};
  case ObservableKind::regularized:
    return {regularized_exact(grid, spec.modes, spec.time).coeffs(), {}};
  case ObservableKind::time_discrete:
    return {cn_time_discrete(grid, spec.modes, spec.steps)[spec.step].coeffs(), {}};
  case ObservableKind::fem:
    return {{}, cn_fem_spde(grid, assemble(*spec.mesh), spec.steps)[spec.step]};
  }
  return {};
}

/// Exact linear coefficients of an observable against every increment R_j^n.
/// Column index (n - 1) * J* + (j - 1).
class CoefficientMap {
public:
  CoefficientMap(NoiseDims dims, Matrix spectral, Matrix nodal, std::optional<Mesh> mesh)
      : dims_{dims}, spectral_{std::move(spectral)}, nodal_{std::move(nodal)}, mesh_{mesh} {}

  const NoiseDims &dims() const { return dims_; }
  const Matrix &spectral() const { return spectral_; }
  const Matrix &nodal() const { return nodal_; }

  /// The observable for one realization, as a linear combination of increments.
  ObservableValue evaluate(const NoiseGrid &grid) const {
    detail::require(grid.dims() == dims_, "CoefficientMap::evaluate: grid mismatch");
    const Eigen::Map<const Vector> r(grid.increments().data(), grid.increments().size());
    ObservableValue out;
    if (spectral_.rows() > 0)
      out.spectral = spectral_ * r;
    if (nodal_.rows() > 0)
      out.nodal = nodal_ * r;
    return out;
  }

  /// E ||X||^2 = dt dx sum_{n,j} ||coefficient function||^2 by independence.
  double second_moment() const {
    double sum = spectral_.squaredNorm();
    if (nodal_.rows() > 0) {
      const FemSystem sys = assemble(*mesh_);
      const Matrix Mn = sys.mass.to_dense() * nodal_;
      sum += nodal_.cwiseProduct(Mn).sum();
      if (spectral_.rows() > 0) {
        const Matrix G = sine_hat_matrix(static_cast<int>(spectral_.rows()), *mesh_);
        sum += 2.0 * spectral_.cwiseProduct(G * nodal_).sum();
      }
    }
    return dims_.cell_area() * sum;
  }

  friend CoefficientMap operator-(const CoefficientMap &a, const CoefficientMap &b) {
    detail::require(a.dims_ == b.dims_, "CoefficientMap: grid mismatch");
    const Eigen::Index cols = a.dims_.n_star * a.dims_.j_star;
    auto diff = [cols](const Matrix &x, const Matrix &y) {
      const Eigen::Index rows = std::max(x.rows(), y.rows());
      Matrix d = Matrix::Zero(rows, rows > 0 ? cols : 0);
      if (x.rows() > 0)
        d.topRows(x.rows()) += x;
      if (y.rows() > 0)
        d.topRows(y.rows()) -= y;
      return d;
    };
    if (a.mesh_ && b.mesh_)
      detail::require(*a.mesh_ == *b.mesh_, "CoefficientMap: mesh mismatch");
    return CoefficientMap(a.dims_, diff(a.spectral_, b.spectral_), diff(a.nodal_, b.nodal_),
                          a.mesh_ ? a.mesh_ : b.mesh_);
  }

private:
  NoiseDims dims_;
  Matrix spectral_;
  Matrix nodal_;
  std::optional<Mesh> mesh_;
};

namespace detail {

/// Column block for separable coefficients time(k, n) * space(k, j) / (dt dx).
inline Matrix separable_columns(const Matrix &time, const Matrix &space, const NoiseDims &dims) {
  const int N = dims.n_star;
  const int J = dims.j_star;
  Matrix out(time.rows(), static_cast<Eigen::Index>(N) * J);
  for (int n = 0; n < N; ++n)
    for (int j = 0; j < J; ++j)
      out.col(static_cast<Eigen::Index>(n) * J + j) =
          time.col(n).cwiseProduct(space.col(j)) / dims.cell_area();
  return out;
}

} // namespace detail

inline CoefficientMap coefficient_map(const ObservableSpec &spec, const NoiseDims &dims) {
  dims.validate();
  detail::require(std::abs(spec.horizon - dims.horizon) <= 1e-14 * dims.horizon,
                  "coefficient_map: inconsistent time horizons");
  const Eigen::Index cols = static_cast<Eigen::Index>(dims.n_star) * dims.j_star;
  switch (spec.kind) {
  case ObservableKind::zero:
    return CoefficientMap(dims, Matrix(0, cols), Matrix(0, cols), std::nullopt);
  case ObservableKind::regularized: {
    const Matrix time = regularized_time_factors(spec.modes, spec.time, dims);
    const Matrix space = mode_cell_weights(spec.modes, dims.j_star).b;
    return CoefficientMap(dims, detail::separable_columns(time, space, dims), Matrix(0, cols),
                          std::nullopt);
  }
  case ObservableKind::time_discrete: {
    const Matrix time =
        propagated_time_factors(sine_eigenvalues(spec.modes), spec.step, spec.steps, dims);
    const Matrix space = mode_cell_weights(spec.modes, dims.j_star).b;
    return CoefficientMap(dims, detail::separable_columns(time, space, dims), Matrix(0, cols),
                          std::nullopt);
  }
  case ObservableKind::fem: {
    detail::require(spec.mesh.has_value(), "coefficient_map: mesh required");
    const FemSystem sys = assemble(*spec.mesh);
    const FemEigenBasis basis = generalized_eigen(sys);
    const Matrix time = propagated_time_factors(basis.values, spec.step, spec.steps, dims);
    // int_{D_j} phi_p: P x J*
    const Matrix space = basis.vectors.transpose() * hat_cell_matrix(*spec.mesh, dims.j_star);
    const Matrix in_basis = detail::separable_columns(time, space, dims);
    return CoefficientMap(dims, Matrix(0, cols), basis.vectors * in_basis, spec.mesh);
  }
  }
  throw std::invalid_argument("coefficient_map: unknown observable");
}

} // namespace stochheat
