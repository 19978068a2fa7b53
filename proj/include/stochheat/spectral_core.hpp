#pragma once

// Sine eigenbasis of the Dirichlet Laplacian on D = (0, 1):
//   eps_k(x) = sqrt(2) sin(lambda_k x),  lambda_k = k pi,  -eps_k'' = lambda_k^2 eps_k.
// Mode indices are 1-based throughout the library.

#include "stochheat/core.hpp"

#include <cmath>
#include <limits>

namespace stochheat {

/// One sine mode; lambda is the square root of the Laplacian eigenvalue.
class SpectralMode {
public:
  explicit SpectralMode(int k) : k_{k} {
    detail::require(k >= 1, "SpectralMode: index must be >= 1");
  }

  int index() const { return k_; }
  double lambda() const { return k_ * pi; }
  double eigenvalue() const { return lambda() * lambda(); }

private:
  int k_;
};

/// Truncated expansion sum_{k<=K} c_k eps_k of an L^2(D) function.
class SpectralField {
public:
  explicit SpectralField(Vector coeffs) : c_{std::move(coeffs)} {
    detail::require(c_.size() >= 1, "SpectralField: truncation level must be >= 1");
  }

  static SpectralField zeros(int K) { return SpectralField(Vector::Zero(K)); }

  /// eps_k embedded in a K-mode field.
  static SpectralField mode(int k, int K) {
    detail::require(k >= 1 && k <= K, "SpectralField::mode: index out of range");
    Vector c = Vector::Zero(K);
    c(k - 1) = 1.0;
    return SpectralField(std::move(c));
  }

  int size() const { return static_cast<int>(c_.size()); }
  double coeff(int k) const { return c_(k - 1); }
  const Vector &coeffs() const { return c_; }
  Vector &coeffs() { return c_; }

  /// Parseval: (eps_k) is orthonormal. Summed in increasing k.
  double l2_norm() const {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < c_.size(); ++k)
      sum += c_(k) * c_(k);
    return std::sqrt(sum);
  }

  double evaluate(double x) const {
    double sum = 0.0;
    for (int k = 1; k <= size(); ++k)
      sum += c_(k - 1) * std::sin(k * pi * x);
    return std::sqrt(2.0) * sum;
  }

  SpectralField &operator+=(const SpectralField &o) {
    resize_to(o.size());
    c_.head(o.size()) += o.c_;
    return *this;
  }
  SpectralField &operator-=(const SpectralField &o) {
    resize_to(o.size());
    c_.head(o.size()) -= o.c_;
    return *this;
  }
  SpectralField &operator*=(double a) {
    c_ *= a;
    return *this;
  }

  friend SpectralField operator+(SpectralField a, const SpectralField &b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField &b) { return a -= b; }
  friend SpectralField operator*(double a, SpectralField f) { return f *= a; }

private:
  void resize_to(int K) {
    if (K > size())
      c_.conservativeResizeLike(Vector::Zero(K));
  }

  Vector c_;
};

/// Exponent s of the spectral Sobolev scale H-dot^s.
struct HdotIndex {
  double s = 0.0;
};

inline double eigenfunction(int k, double x) {
  detail::require(k >= 1, "eigenfunction: index must be >= 1");
  detail::require_domain(x >= 0.0 && x <= 1.0, "eigenfunction: x outside [0,1]");
  return std::sqrt(2.0) * std::sin(k * pi * x);
}

/// Heat semigroup S(t): coefficient k is damped by exp(-lambda_k^2 t).
inline SpectralField semigroup_apply(double t, const SpectralField &f) {
  detail::require_domain(t >= 0.0, "semigroup_apply: negative time");
  Vector c = f.coeffs();
  for (int k = 1; k <= f.size(); ++k)
    c(k - 1) *= std::exp(-SpectralMode(k).eigenvalue() * t);
  return SpectralField(std::move(c));
}

/// Partial sum of the Dirichlet heat kernel G_t(x, y) over the first K modes.
inline double green_kernel(double t, double x, double y, int K) {
  detail::require_domain(t > 0.0, "green_kernel: t must be positive");
  detail::require_domain(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0,
                         "green_kernel: point outside [0,1]");
  detail::require(K >= 1, "green_kernel: K must be >= 1");
  double sum = 0.0;
  for (int k = 1; k <= K; ++k) {
    const double lam = k * pi;
    sum += std::exp(-lam * lam * t) * std::sin(lam * x) * std::sin(lam * y);
  }
  return 2.0 * sum;
}

inline double hdot_norm(const SpectralField &f, HdotIndex index) {
  double sum = 0.0;
  for (int k = 1; k <= f.size(); ++k) {
    const double c = f.coeff(k);
    sum += c * c * std::pow(k * pi, 2.0 * index.s);
  }
  return std::sqrt(sum);
}

/// Solves v'' = f with v(0) = v(1) = 0, i.e. v_k = -c_k / lambda_k^2.
inline SpectralField elliptic_inverse(const SpectralField &f) {
  Vector c = f.coeffs();
  for (int k = 1; k <= f.size(); ++k)
    c(k - 1) /= -SpectralMode(k).eigenvalue();
  return SpectralField(std::move(c));
}

/// Per-mode second derivative: multiplies coefficient k by -lambda_k^2.
inline SpectralField second_derivative(const SpectralField &f) {
  Vector c = f.coeffs();
  for (int k = 1; k <= f.size(); ++k)
    c(k - 1) *= -SpectralMode(k).eigenvalue();
  return SpectralField(std::move(c));
}

/// Integral bound on sum_{k>K} lambda_k^{-nu}, valid for nu > 1.
inline double tail_bound(int K, double nu) {
  detail::require(nu > 1.0, "tail_bound: series diverges for nu <= 1");
  return 1.0 / ((nu - 1.0) * std::pow(pi, nu) * std::pow(static_cast<double>(K), nu - 1.0));
}

inline constexpr int default_truncation_cap = 1 << 26;

/// Smallest K whose tail bound sum_{k>K} lambda_k^{-nu} <= pi^{-nu} K^{1-nu}/(nu-1)
/// does not exceed `tol`. Throws std::range_error above `cap`.
inline int truncation_for_tolerance(double tol, double nu = 2.0, int cap = default_truncation_cap) {
  detail::require(tol > 0.0, "truncation_for_tolerance: tol must be positive");
  detail::require(nu > 1.0 && nu <= 2.0, "truncation_for_tolerance: nu must lie in (1, 2]");
  const double slack = 1.0 + 1e-12;
  if (tail_bound(1, nu) <= tol * slack)
    return 1;
  const double estimate = std::pow((nu - 1.0) * std::pow(pi, nu) * tol, -1.0 / (nu - 1.0));
  if (!(estimate < static_cast<double>(cap)))
    throw std::range_error("truncation_for_tolerance: required K exceeds cap");
  int K = std::max(1, static_cast<int>(std::ceil(estimate)));
  while (K > 1 && tail_bound(K - 1, nu) <= tol * slack)
    --K;
  while (tail_bound(K, nu) > tol * slack)
    ++K;
  if (K > cap)
    throw std::range_error("truncation_for_tolerance: required K exceeds cap");
  return K;
}

} // namespace stochheat
