#pragma once

// Continuous piecewise-linear finite elements on a uniform mesh of D = (0, 1)
// with homogeneous Dirichlet conditions. Unknowns are the values at the
// interior nodes x_i = i h, i = 1..nu_h (1-based in the API, 0-based in vectors).
//
// The discrete Laplacian is taken with the positive sign,
// (Delta_h phi, chi) = (phi', chi'), so the stiffness matrix represents M Delta_h.

#include "stochheat/core.hpp"
#include "stochheat/quadrature.hpp"
#include "stochheat/spectral_core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <concepts>

namespace stochheat {

class Mesh {
public:
  explicit Mesh(int intervals) : intervals_{intervals} {
    detail::require(intervals >= 2, "Mesh: at least two intervals are required");
  }

  int intervals() const { return intervals_; }
  int interior_nodes() const { return intervals_ - 1; }
  double h() const { return 1.0 / intervals_; }
  double node(int i) const { return static_cast<double>(i) / intervals_; }

  friend bool operator==(const Mesh &, const Mesh &) = default;

private:
  int intervals_;
};

/// Symmetric tridiagonal matrix.
struct Tridiagonal {
  Vector diag;
  Vector off; // size n - 1

  int size() const { return static_cast<int>(diag.size()); }

  Vector multiply(const Vector &v) const {
    Vector out = diag.cwiseProduct(v);
    const int n = size();
    for (int i = 0; i + 1 < n; ++i) {
      out(i) += off(i) * v(i + 1);
      out(i + 1) += off(i) * v(i);
    }
    return out;
  }

  double quadratic_form(const Vector &v) const { return v.dot(multiply(v)); }
  double bilinear_form(const Vector &u, const Vector &v) const { return u.dot(multiply(v)); }

  /// Thomas algorithm without pivoting; intended for SPD matrices.
  Vector solve(const Vector &rhs) const {
    const int n = size();
    Vector c(n), d(n);
    double denom = diag(0);
    c(0) = n > 1 ? off(0) / denom : 0.0;
    d(0) = rhs(0) / denom;
    for (int i = 1; i < n; ++i) {
      denom = diag(i) - off(i - 1) * c(i - 1);
      c(i) = (i + 1 < n) ? off(i) / denom : 0.0;
      d(i) = (rhs(i) - off(i - 1) * d(i - 1)) / denom;
    }
    for (int i = n - 2; i >= 0; --i)
      d(i) -= c(i) * d(i + 1);
    return d;
  }

  Matrix to_dense() const {
    const int n = size();
    Matrix a = Matrix::Zero(n, n);
    a.diagonal() = diag;
    for (int i = 0; i + 1 < n; ++i)
      a(i, i + 1) = a(i + 1, i) = off(i);
    return a;
  }

  /// a * A + b * B
  static Tridiagonal combine(double a, const Tridiagonal &A, double b, const Tridiagonal &B) {
    return {a * A.diag + b * B.diag, a * A.off + b * B.off};
  }
};

/// Mass and stiffness matrices on the interior nodes.
struct FemSystem {
  Mesh mesh;
  Tridiagonal mass;
  Tridiagonal stiffness;

  int dimension() const { return mesh.interior_nodes(); }
};

inline FemSystem assemble(const Mesh &mesh) {
  const int nu = mesh.interior_nodes();
  const double h = mesh.h();
  FemSystem sys{mesh, {}, {}};
  sys.mass.diag = Vector::Constant(nu, 2.0 * h / 3.0);
  sys.mass.off = Vector::Constant(nu - 1, h / 6.0);
  sys.stiffness.diag = Vector::Constant(nu, 2.0 / h);
  sys.stiffness.off = Vector::Constant(nu - 1, -1.0 / h);
  return sys;
}

/// Value at x of the piecewise linear function with interior nodal values v.
inline double evaluate_nodal(const Vector &v, const Mesh &mesh, double x) {
  detail::require_domain(x >= 0.0 && x <= 1.0, "evaluate_nodal: x outside [0,1]");
  const double s = x * mesh.intervals();
  const int cell = std::min(static_cast<int>(s), mesh.intervals() - 1);
  const double theta = s - cell;
  auto value = [&](int i) { return (i <= 0 || i >= mesh.intervals()) ? 0.0 : v(i - 1); };
  return (1.0 - theta) * value(cell) + theta * value(cell + 1);
}

/// Nodal interpolant of f.
template <class F> Vector interpolate(F &&f, const Mesh &mesh) {
  Vector v(mesh.interior_nodes());
  for (int i = 1; i <= mesh.interior_nodes(); ++i)
    v(i - 1) = f(mesh.node(i));
  return v;
}

inline double l2_norm(const Vector &v, const FemSystem &sys) {
  return std::sqrt(sys.mass.quadratic_form(v));
}

inline double h1_seminorm(const Vector &v, const FemSystem &sys) {
  return std::sqrt(sys.stiffness.quadratic_form(v));
}

inline double h1_norm(const Vector &v, const FemSystem &sys) {
  return std::sqrt(sys.mass.quadratic_form(v) + sys.stiffness.quadratic_form(v));
}

/// (eps_k, hat_i) in closed form: integrating by parts twice moves the second
/// derivative onto the hat, whose second derivative is (d_{i-1} - 2 d_i + d_{i+1}) / h.
inline double sine_hat_inner(int k, int i, const Mesh &mesh) {
  detail::require(k >= 1, "sine_hat_inner: mode index must be >= 1");
  detail::require(i >= 1 && i <= mesh.interior_nodes(), "sine_hat_inner: node out of range");
  const double lam = k * pi;
  const double second_difference = 2.0 * std::sin(lam * mesh.node(i)) -
                                   std::sin(lam * mesh.node(i - 1)) -
                                   std::sin(lam * mesh.node(i + 1));
  return std::sqrt(2.0) * second_difference / (mesh.h() * lam * lam);
}

/// K x nu_h matrix of (eps_k, hat_i).
inline Matrix sine_hat_matrix(int K, const Mesh &mesh) {
  const int nu = mesh.interior_nodes();
  Matrix g(K, nu);
  for (int k = 1; k <= K; ++k) {
    const double lam = k * pi;
    const double scale = std::sqrt(2.0) / (mesh.h() * lam * lam);
    double left = 0.0;                          // sin(lam x_{i-1})
    double mid = std::sin(lam * mesh.node(1)); // sin(lam x_i)
    for (int i = 1; i <= nu; ++i) {
      const double right = std::sin(lam * mesh.node(i + 1));
      g(k - 1, i - 1) = scale * (2.0 * mid - left - right);
      left = mid;
      mid = right;
    }
  }
  return g;
}

namespace detail {

/// Antiderivative of hat_i from -infinity.
inline double hat_antiderivative(double y, double center, double h) {
  const double u = std::clamp(y, center - h, center + h) - (center - h);
  if (u <= h)
    return u * u / (2.0 * h);
  const double w = u - h;
  return 0.5 * h + w - w * w / (2.0 * h);
}

} // namespace detail

/// int_{D_j} hat_i(y) dy for a noise partition with j_star cells.
inline double hat_cell_overlap(int i, int j, const Mesh &mesh, int j_star) {
  detail::require(i >= 1 && i <= mesh.interior_nodes(), "hat_cell_overlap: node out of range");
  detail::require(j >= 1 && j <= j_star, "hat_cell_overlap: cell out of range");
  const double a = static_cast<double>(j - 1) / j_star;
  const double b = static_cast<double>(j) / j_star;
  const double c = mesh.node(i);
  return detail::hat_antiderivative(b, c, mesh.h()) - detail::hat_antiderivative(a, c, mesh.h());
}

/// nu_h x j_star matrix of hat/cell overlaps.
inline Matrix hat_cell_matrix(const Mesh &mesh, int j_star) {
  const int nu = mesh.interior_nodes();
  Matrix o = Matrix::Zero(nu, j_star);
  const double h = mesh.h();
  for (int i = 1; i <= nu; ++i) {
    const double c = mesh.node(i);
    const int j_lo = std::max(1, static_cast<int>(std::floor((c - h) * j_star)) + 1);
    const int j_hi = std::min(j_star, static_cast<int>(std::ceil((c + h) * j_star)));
    for (int j = j_lo; j <= j_hi; ++j)
      o(i - 1, j - 1) = hat_cell_overlap(i, j, mesh, j_star);
  }
  return o;
}

/// Load vector (f, hat_i) for a sine expansion; exact.
inline Vector load_vector(const SpectralField &f, const Mesh &mesh) {
  return sine_hat_matrix(f.size(), mesh).transpose() * f.coeffs();
}

/// Load vector (f, hat_i) by 8-point Gauss-Legendre on each half-support.
template <std::invocable<double> F> Vector load_vector(F &&f, const Mesh &mesh, int panels_per_element = 2) {
  const int nu = mesh.interior_nodes();
  const double h = mesh.h();
  Vector load = Vector::Zero(nu);
  for (int e = 0; e < mesh.intervals(); ++e) {
    const double a = mesh.node(e);
    const auto rule = composite_gauss<8>(a, a + h, panels_per_element);
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double x = rule.nodes[q];
      const double fx = f(x) * rule.weights[q];
      const double theta = (x - a) / h;
      if (e >= 1)
        load(e - 1) += fx * (1.0 - theta); // left node of the element
      if (e + 1 <= nu)
        load(e) += fx * theta;             // right node
    }
  }
  return load;
}

/// P_h f: solves M c = (f, hat_i).
inline Vector l2_project(const SpectralField &f, const FemSystem &sys) {
  return sys.mass.solve(load_vector(f, sys.mesh));
}

template <std::invocable<double> F> Vector l2_project(F &&f, const FemSystem &sys) {
  return sys.mass.solve(load_vector(std::forward<F>(f), sys.mesh));
}

/// T_{E,h} f = -Delta_h^{-1} P_h f, i.e. S v = -(f, hat_i).
inline Vector elliptic_solve_discrete(const SpectralField &f, const FemSystem &sys) {
  return sys.stiffness.solve(-load_vector(f, sys.mesh));
}

template <std::invocable<double> F> Vector elliptic_solve_discrete(F &&f, const FemSystem &sys) {
  return sys.stiffness.solve(-load_vector(std::forward<F>(f), sys.mesh));
}

/// Eigenpairs S phi = mu M phi with phi_i^T M phi_j = delta_ij.
struct FemEigenBasis {
  Vector values;  // ascending, positive
  Matrix vectors; // column p holds phi_p as nodal values

  int size() const { return static_cast<int>(values.size()); }

  /// Coordinates (v, phi_p)_{L^2} = phi_p^T M v.
  Vector coordinates(const Vector &v, const FemSystem &sys) const {
    return vectors.transpose() * sys.mass.multiply(v);
  }
};

inline FemEigenBasis generalized_eigen(const FemSystem &sys) {
  const Matrix S = sys.stiffness.to_dense();
  const Matrix M = sys.mass.to_dense();
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> solver(S, M, Eigen::ComputeEigenvectors |
                                                                    Eigen::Ax_lBx);
  if (solver.info() != Eigen::Success)
    throw NumericalFailure("generalized_eigen: eigensolver did not converge");
  FemEigenBasis basis{solver.eigenvalues(), solver.eigenvectors()};
  if (!basis.values.allFinite() || !basis.vectors.allFinite() || basis.values.minCoeff() <= 0.0)
    throw NumericalFailure("generalized_eigen: invalid eigenpairs");

  // Fix signs so that phi_p is positively aligned with the nodal sine of mode p.
  const int nu = sys.dimension();
  for (int p = 0; p < nu; ++p) {
    const Vector s = interpolate([&](double x) { return std::sin((p + 1) * pi * x); }, sys.mesh);
    if (s.dot(sys.mass.multiply(basis.vectors.col(p))) < 0.0)
      basis.vectors.col(p) *= -1.0;
  }
  return basis;
}

/// G(x, y) = sum_p weight(mu_p) phi_p(x) phi_p(y) for a function of the
/// discrete eigenvalue (e.g. the one-step propagator factors).
template <class Weight>
double eigen_kernel(const FemEigenBasis &basis, const Mesh &mesh, Weight &&weight, double x,
                    double y) {
  double sum = 0.0;
  for (int p = 0; p < basis.size(); ++p) {
    const Vector phi = basis.vectors.col(p);
    sum += weight(basis.values(p)) * evaluate_nodal(phi, mesh, x) * evaluate_nodal(phi, mesh, y);
  }
  return sum;
}

} // namespace stochheat
