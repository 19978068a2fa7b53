#pragma once

// Discretized space-time white noise on (0, T) x (0, 1).
//
// The noise lives on N* x J* cells T_n x D_j, T_n = (t_{n-1}, t_n],
// D_j = (x_{j-1}, x_j]; the increment R_j^n = W(T_n x D_j) ~ N(0, dt dx).
// Cell indices n, j are 1-based.

#include "stochheat/core.hpp"
#include "stochheat/quadrature.hpp"
#include "stochheat/spectral_core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>

namespace stochheat {

/// Geometry of a noise grid; independent of any realization.
struct NoiseDims {
  int n_star = 1;
  int j_star = 1;
  double horizon = 1.0;

  double dt() const { return horizon / n_star; }
  double dx() const { return 1.0 / j_star; }
  double cell_area() const { return dt() * dx(); }
  double time_node(int n) const { return n * dt(); }
  double space_node(int j) const { return static_cast<double>(j) / j_star; }

  void validate() const {
    detail::require(n_star >= 1 && j_star >= 1, "NoiseDims: cell counts must be >= 1");
    detail::require(horizon > 0.0, "NoiseDims: horizon must be positive");
  }

  friend bool operator==(const NoiseDims &, const NoiseDims &) = default;
};

namespace rng {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Standard normal draw that depends only on (seed, n, j); Box-Muller on two
/// counter-derived uniforms.
inline double cell_gaussian(std::uint64_t seed, std::uint64_t n, std::uint64_t j) {
  const std::uint64_t key = splitmix64(seed ^ splitmix64((n << 32) ^ j));
  const std::uint64_t a = splitmix64(key);
  const std::uint64_t b = splitmix64(key ^ 0xD1B54A32D192ED03ULL);
  const double u1 = (static_cast<double>(a >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
}

} // namespace rng

/// One realization of the cell increments plus its grid metadata. Immutable.
class NoiseGrid {
public:
  using Increments = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  NoiseGrid(NoiseDims dims, std::uint64_t seed, Increments increments)
      : dims_{dims}, seed_{seed}, r_{std::move(increments)} {
    dims_.validate();
    detail::require(r_.rows() == dims_.n_star && r_.cols() == dims_.j_star,
                    "NoiseGrid: increment matrix does not match dimensions");
  }

  static NoiseGrid zeros(NoiseDims dims) {
    dims.validate();
    return NoiseGrid(dims, 0, Increments::Zero(dims.n_star, dims.j_star));
  }

  const NoiseDims &dims() const { return dims_; }
  int n_star() const { return dims_.n_star; }
  int j_star() const { return dims_.j_star; }
  double dt() const { return dims_.dt(); }
  double dx() const { return dims_.dx(); }
  double horizon() const { return dims_.horizon; }
  std::uint64_t seed() const { return seed_; }

  /// R_j^n with 1-based cell indices.
  double increment(int n, int j) const { return r_(n - 1, j - 1); }
  const Increments &increments() const { return r_; }

  friend bool operator==(const NoiseGrid &a, const NoiseGrid &b) {
    return a.dims_ == b.dims_ && a.seed_ == b.seed_ && a.r_ == b.r_;
  }

private:
  NoiseDims dims_;
  std::uint64_t seed_;
  Increments r_;
};

/// Independent N(0, dt dx) increments; bit-identical for identical arguments.
inline NoiseGrid sample(int n_star, int j_star, double horizon, std::uint64_t seed) {
  const NoiseDims dims{n_star, j_star, horizon};
  dims.validate();
  const double scale = std::sqrt(dims.cell_area());
  NoiseGrid::Increments r(n_star, j_star);
  for (int n = 1; n <= n_star; ++n)
    for (int j = 1; j <= j_star; ++j)
      r(n - 1, j - 1) = scale * rng::cell_gaussian(seed, static_cast<std::uint64_t>(n),
                                                   static_cast<std::uint64_t>(j));
  return NoiseGrid(dims, seed, std::move(r));
}

inline NoiseGrid sample(const NoiseDims &dims, std::uint64_t seed) {
  return sample(dims.n_star, dims.j_star, dims.horizon, seed);
}

/// Block sums over time_factor x space_factor fine cells.
inline NoiseGrid coarsen(const NoiseGrid &grid, int time_factor, int space_factor) {
  detail::require(time_factor >= 1 && space_factor >= 1, "coarsen: factors must be >= 1");
  detail::require(grid.n_star() % time_factor == 0 && grid.j_star() % space_factor == 0,
                  "coarsen: factors must divide the cell counts");
  const NoiseDims coarse{grid.n_star() / time_factor, grid.j_star() / space_factor,
                         grid.horizon()};
  NoiseGrid::Increments r = NoiseGrid::Increments::Zero(coarse.n_star, coarse.j_star);
  for (int n = 0; n < grid.n_star(); ++n)
    for (int j = 0; j < grid.j_star(); ++j)
      r(n / time_factor, j / space_factor) += grid.increments()(n, j);
  return NoiseGrid(coarse, grid.seed(), std::move(r));
}

/// Cell containing t under half-open cells (t_{n-1}, t_n].
inline int cell_index(double t, double width, int count) {
  const int n = static_cast<int>(std::ceil(t / width));
  return std::clamp(n, 1, count);
}

/// Value of the piecewise constant noise W at (t, x).
inline double w_eval(const NoiseGrid &grid, double t, double x) {
  detail::require_domain(t > 0.0 && t <= grid.horizon(), "w_eval: t outside (0, T]");
  detail::require_domain(x > 0.0 && x < 1.0, "w_eval: x outside (0, 1)");
  const int n = cell_index(t, grid.dt(), grid.n_star());
  const int j = cell_index(x, grid.dx(), grid.j_star());
  return grid.increment(n, j) / grid.dims().cell_area();
}

// Binary layout: n_star, j_star, horizon (IEEE bits), seed as little-endian
// 64-bit words, then n_star * j_star row-major little-endian doubles.

namespace detail {

inline void put_u64(std::ostream &out, std::uint64_t v) {
  char bytes[8];
  for (int b = 0; b < 8; ++b)
    bytes[b] = static_cast<char>((v >> (8 * b)) & 0xFF);
  out.write(bytes, 8);
}

inline std::uint64_t get_u64(std::istream &in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char *>(bytes), 8);
  if (!in)
    throw std::runtime_error("noise grid: truncated input");
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b)
    v = (v << 8) | bytes[b];
  return v;
}

} // namespace detail

inline void write_binary(std::ostream &out, const NoiseGrid &grid) {
  detail::put_u64(out, static_cast<std::uint64_t>(grid.n_star()));
  detail::put_u64(out, static_cast<std::uint64_t>(grid.j_star()));
  detail::put_u64(out, std::bit_cast<std::uint64_t>(grid.horizon()));
  detail::put_u64(out, grid.seed());
  for (int n = 0; n < grid.n_star(); ++n)
    for (int j = 0; j < grid.j_star(); ++j)
      detail::put_u64(out, std::bit_cast<std::uint64_t>(grid.increments()(n, j)));
}

inline NoiseGrid read_binary(std::istream &in) {
  const auto n_star = detail::get_u64(in);
  const auto j_star = detail::get_u64(in);
  const double horizon = std::bit_cast<double>(detail::get_u64(in));
  const auto seed = detail::get_u64(in);
  if (n_star == 0 || j_star == 0 || n_star > (1u << 30) || j_star > (1u << 30))
    throw std::runtime_error("noise grid: corrupt header");
  NoiseGrid::Increments r(static_cast<int>(n_star), static_cast<int>(j_star));
  for (Eigen::Index n = 0; n < r.rows(); ++n)
    for (Eigen::Index j = 0; j < r.cols(); ++j)
      r(n, j) = std::bit_cast<double>(detail::get_u64(in));
  return NoiseGrid({static_cast<int>(n_star), static_cast<int>(j_star), horizon}, seed,
                   std::move(r));
}

// ---------------------------------------------------------------------------
// Projection onto piecewise constants in (s, y).

/// Cell averages from exact cell integrals `cell_integral(n, j)`.
template <class CellIntegral>
Matrix project_pi_exact(CellIntegral &&cell_integral, const NoiseDims &dims) {
  Matrix avg(dims.n_star, dims.j_star);
  for (int n = 1; n <= dims.n_star; ++n)
    for (int j = 1; j <= dims.j_star; ++j)
      avg(n - 1, j - 1) = cell_integral(n, j) / dims.cell_area();
  return avg;
}

/// Cell averages of g(s, y) by tensor Gauss-Legendre quadrature per cell.
template <class G>
Matrix project_pi(G &&g, const NoiseDims &dims, int panels_per_cell = 4) {
  const auto ref = composite_gauss<8>(0.0, 1.0, panels_per_cell);
  Matrix avg(dims.n_star, dims.j_star);
  for (int n = 1; n <= dims.n_star; ++n) {
    const double s0 = dims.time_node(n - 1);
    for (int j = 1; j <= dims.j_star; ++j) {
      const double y0 = dims.space_node(j - 1);
      double sum = 0.0;
      for (std::size_t p = 0; p < ref.nodes.size(); ++p)
        for (std::size_t q = 0; q < ref.nodes.size(); ++q)
          sum += ref.weights[p] * ref.weights[q] *
                 g(s0 + ref.nodes[p] * dims.dt(), y0 + ref.nodes[q] * dims.dx());
      avg(n - 1, j - 1) = sum;
    }
  }
  return avg;
}

/// L^2((0,T) x D) norm of the piecewise constant function with these cell values.
inline double piecewise_constant_norm(const Matrix &cells, const NoiseDims &dims) {
  return std::sqrt(dims.cell_area() * cells.squaredNorm());
}

// ---------------------------------------------------------------------------
// Closed-form cell functionals of the sine modes.

/// b_{k,j} = int_{D_j} eps_k(y) dy.
inline double cell_weight(int k, int j, int j_star) {
  const double lam = k * pi;
  const double a = static_cast<double>(j - 1) / j_star;
  const double b = static_cast<double>(j) / j_star;
  // cos(lam a) - cos(lam b) = 2 sin(lam (a + b) / 2) sin(lam (b - a) / 2)
  return std::sqrt(2.0) * 2.0 * std::sin(0.5 * lam * (a + b)) * std::sin(0.5 * lam * (b - a)) /
         lam;
}

/// sum_j b_{k,j}^2 in closed form.
inline double cell_weight_square_sum(int k, int j_star) {
  const double lam = k * pi;
  const double s = std::sin(0.5 * lam / j_star);
  double alias = 0.0;
  if (k % j_star == 0)
    alias = ((k / j_star) % 2 == 0) ? 1.0 : -1.0;
  return 4.0 * j_star * s * s * (1.0 - alias) / (lam * lam);
}

/// b_{k,j} for k = 1..K, j = 1..J*.
struct CellWeightTable {
  Matrix b; // K x J*

  int modes() const { return static_cast<int>(b.rows()); }
  int cells() const { return static_cast<int>(b.cols()); }
  double operator()(int k, int j) const { return b(k - 1, j - 1); }
};

inline CellWeightTable mode_cell_weights(int K, int j_star) {
  detail::require(K >= 1 && j_star >= 1, "mode_cell_weights: K and J* must be >= 1");
  CellWeightTable table{Matrix(K, j_star)};
  for (int k = 1; k <= K; ++k)
    for (int j = 1; j <= j_star; ++j)
      table.b(k - 1, j - 1) = cell_weight(k, j, j_star);
  return table;
}

/// I_{k,n}(t) = int_{T_n cap (0,t)} exp(-lambda_k^2 (t - s)) ds.
inline double time_overlap_integral(int k, int n, double t, const NoiseDims &dims) {
  detail::require(k >= 1 && n >= 1 && n <= dims.n_star, "time_overlap_integral: index out of range");
  const double lo = dims.time_node(n - 1);
  if (t <= lo)
    return 0.0;
  const double hi = std::min(t, dims.time_node(n));
  const double mu = SpectralMode(k).eigenvalue();
  return std::exp(-mu * (t - hi)) * -std::expm1(-mu * (hi - lo)) / mu;
}

/// sum_n I_{k,n}(t)^2 via geometric series over the full cells before t.
inline double time_overlap_square_sum(int k, double t, const NoiseDims &dims) {
  if (t <= 0.0)
    return 0.0;
  const double mu = SpectralMode(k).eigenvalue();
  const int p = cell_index(t, dims.dt(), dims.n_star);
  const double delta = t - dims.time_node(p - 1);
  const double partial = -std::expm1(-mu * delta) / mu;
  double sum = partial * partial;
  if (p > 1) {
    const double a = mu * dims.dt();
    const double full = -std::expm1(-a) / mu;
    const double geometric = std::expm1(-2.0 * a * (p - 1)) / std::expm1(-2.0 * a);
    sum += full * full * std::exp(-2.0 * mu * delta) * geometric;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Exact overlaps between step intervals Delta_l = (tau_{l-1}, tau_l), M steps,
// and noise cells T_n, N cells, on the same horizon.

/// |Delta_l cap T_n|, computed on the common integer lattice of spacing T/(M N).
inline double overlap_length(int l, int M, int n, int N, double horizon) {
  const std::int64_t lo = std::max<std::int64_t>(std::int64_t{N} * (l - 1), std::int64_t{M} * (n - 1));
  const std::int64_t hi = std::min<std::int64_t>(std::int64_t{N} * l, std::int64_t{M} * n);
  if (hi <= lo)
    return 0.0;
  return horizon * static_cast<double>(hi - lo) / (static_cast<double>(M) * N);
}

/// Calls fn(l, n, length) for every step/cell pair with positive overlap,
/// ordered by l then n.
template <class Fn> void for_each_overlap(int M, int N, double horizon, Fn &&fn) {
  for (int l = 1; l <= M; ++l) {
    const std::int64_t lo = std::int64_t{N} * (l - 1);
    const std::int64_t hi = std::int64_t{N} * l;
    const int n_first = static_cast<int>(lo / M) + 1;
    const int n_last = static_cast<int>((hi + M - 1) / M);
    for (int n = n_first; n <= std::min(n_last, N); ++n) {
      const double len = overlap_length(l, M, n, N, horizon);
      if (len > 0.0)
        fn(l, n, len);
    }
  }
}

} // namespace stochheat
