#include <catch2/catch_amalgamated.hpp>

#include "stochheat/noise_grid.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <random>
#include <sstream>

using namespace stochheat;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("sample dimensions and validation", "[noise_grid]") {
  const NoiseGrid g = sample(8, 4, 2.0, 1);
  CHECK(g.n_star() == 8);
  CHECK(g.j_star() == 4);
  CHECK(g.dt() * g.n_star() == 2.0);
  CHECK(g.dx() * g.j_star() == 1.0);
  CHECK_THROWS(sample(0, 4, 1.0, 1));
  CHECK_THROWS(sample(4, 0, 1.0, 1));
  CHECK_THROWS(sample(4, 4, 0.0, 1));
}

TEST_CASE("sampling is deterministic per seed", "[noise_grid]") {
  CHECK(sample(16, 8, 1.0, 42) == sample(16, 8, 1.0, 42));
  CHECK_FALSE(sample(16, 8, 1.0, 42) == sample(16, 8, 1.0, 43));
  // Values depend on (seed, n, j) only, not on the grid extent.
  const NoiseGrid small = sample(4, 4, 1.0, 7);
  const NoiseGrid large = sample(8, 8, 1.0, 7);
  const double ratio = std::sqrt(small.dims().cell_area() / large.dims().cell_area());
  for (int n = 1; n <= 4; ++n)
    for (int j = 1; j <= 4; ++j)
      CHECK_THAT(small.increment(n, j), WithinRel(ratio * large.increment(n, j), 1e-15));
}

TEST_CASE("increment variance", "[noise_grid][property]") {
  const NoiseGrid g = sample(400, 250, 1.0, 2024); // 10^5 entries
  const double var = g.increments().squaredNorm() / static_cast<double>(g.increments().size());
  CHECK(std::abs(var / g.dims().cell_area() - 1.0) < 0.05);
  CHECK(std::abs(g.increments().mean()) < 4.0 * std::sqrt(g.dims().cell_area() / 1e5));
}

TEST_CASE("distinct cells are uncorrelated", "[noise_grid][property]") {
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const NoiseGrid g = sample(2, 2, 1.0, s);
    const double a = g.increment(1, 1);
    const double b = g.increment(2, 2);
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  CHECK(std::abs(sxy / std::sqrt(sxx * syy)) < 0.05);
}

TEST_CASE("coarsening", "[noise_grid]") {
  const NoiseGrid g = sample(8, 8, 1.0, 5);
  const NoiseGrid c = coarsen(g, 2, 2);
  CHECK(c.n_star() == 4);
  CHECK(c.j_star() == 4);
  CHECK_THAT(c.increment(2, 3), WithinAbs(g.increment(3, 5) + g.increment(3, 6) +
                                              g.increment(4, 5) + g.increment(4, 6),
                                          1e-15));
  // Same block sums up to summation order.
  const auto ulps = [&](const NoiseGrid &x) {
    return (Matrix(x.increments()) - Matrix(c.increments())).cwiseAbs().maxCoeff() /
           Matrix(c.increments()).cwiseAbs().maxCoeff();
  };
  CHECK(ulps(coarsen(coarsen(g, 2, 1), 1, 2)) < 1e-15);
  CHECK(ulps(coarsen(coarsen(g, 1, 2), 2, 1)) < 1e-15);
  CHECK(coarsen(coarsen(g, 2, 1), 1, 2).dims() == c.dims());
  CHECK(coarsen(g, 1, 1) == g);
  CHECK_THROWS(coarsen(g, 3, 1));
  CHECK_THROWS(coarsen(g, 1, 5));
  CHECK_THROWS(coarsen(g, 0, 1));

  // Variance of coarse entries is the coarse cell area.
  const NoiseGrid fine = sample(512, 400, 1.0, 77);
  const NoiseGrid coarse = coarsen(fine, 4, 2);
  const double var = coarse.increments().squaredNorm() / static_cast<double>(coarse.increments().size());
  CHECK(std::abs(var / coarse.dims().cell_area() - 1.0) < 0.05);
}

TEST_CASE("pointwise evaluation", "[noise_grid]") {
  const NoiseGrid g = sample(4, 4, 1.0, 9);
  const double area = g.dims().cell_area();
  CHECK(w_eval(g, 0.3, 0.3) == w_eval(g, 0.26, 0.49));
  CHECK_THAT(w_eval(g, 0.3, 0.3) * area, WithinAbs(g.increment(2, 2), 1e-18));
  // Half-open cells: the right end belongs to the cell.
  CHECK(w_eval(g, 0.25, 0.5) * area == g.increment(1, 2));
  CHECK(w_eval(g, 1.0, 0.9) * area == g.increment(4, 4));
  CHECK_THROWS_AS(w_eval(g, 0.0, 0.5), std::domain_error);
  CHECK_THROWS_AS(w_eval(g, 0.5, 1.0), std::domain_error);
  CHECK_THROWS_AS(w_eval(g, 1.5, 0.5), std::domain_error);
  // Integral over a cell reproduces the increment.
  const Matrix avg = project_pi([&](double s, double y) { return w_eval(g, s, y); }, g.dims(), 1);
  CHECK_THAT(avg(2, 1) * area, WithinAbs(g.increment(3, 2), 1e-15));
}

TEST_CASE("binary round trip", "[noise_grid]") {
  const NoiseGrid g = sample(6, 5, 0.75, 0xDEADBEEFull);
  std::stringstream buf;
  write_binary(buf, g);
  const std::string bytes = buf.str();
  REQUIRE(bytes.size() == 8 * (4 + 30));
  // Little-endian header.
  CHECK(static_cast<unsigned char>(bytes[0]) == 6);
  CHECK(static_cast<unsigned char>(bytes[8]) == 5);
  CHECK(static_cast<unsigned char>(bytes[24]) == 0xEF);
  CHECK(read_binary(buf) == g);

  std::stringstream truncated(bytes.substr(0, 40));
  CHECK_THROWS(read_binary(truncated));
}

TEST_CASE("projection onto cell averages", "[noise_grid]") {
  const NoiseDims dims{4, 8, 1.0};
  const Matrix constant = project_pi([](double, double) { return 2.5; }, dims);
  CHECK((constant.array() - 2.5).abs().maxCoeff() < 1e-13);

  // Idempotent on piecewise constants.
  const NoiseGrid g = sample(dims, 3);
  const Matrix once = project_pi([&](double s, double y) { return w_eval(g, s, y); }, dims, 2);
  const NoiseGrid rebuilt(dims, 0, (once * dims.cell_area()).eval());
  const Matrix twice = project_pi([&](double s, double y) { return w_eval(rebuilt, s, y); }, dims, 2);
  CHECK((once - twice).cwiseAbs().maxCoeff() < 1e-12);

  // Exact and quadrature projections agree for eps_1(y) exp(-s).
  auto cell = [&](int n, int j) {
    const double s0 = dims.time_node(n - 1), s1 = dims.time_node(n);
    return (std::exp(-s0) - std::exp(-s1)) * cell_weight(1, j, dims.j_star);
  };
  const Matrix exact = project_pi_exact(cell, dims);
  const Matrix quad = project_pi([](double s, double y) { return std::exp(-s) * eigenfunction(1, y); }, dims);
  CHECK((exact - quad).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("projection is an L2 contraction", "[noise_grid][property]") {
  std::mt19937_64 gen(31);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> freq(1, 9);
  const NoiseDims dims{4, 4, 1.0};
  const auto rule = composite_gauss<8>(0.0, 1.0, 16);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = normal(gen), b = normal(gen);
    const int p = freq(gen), q = freq(gen), r = freq(gen);
    auto g = [&](double s, double y) {
      return a * std::sin(p * pi * s) * std::cos(q * pi * y) + b * std::cos(r * pi * (s + y));
    };
    double norm2 = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
      for (std::size_t k = 0; k < rule.nodes.size(); ++k)
        norm2 += rule.weights[i] * rule.weights[k] * std::pow(g(rule.nodes[i], rule.nodes[k]), 2);
    CHECK(piecewise_constant_norm(project_pi(g, dims), dims) <= std::sqrt(norm2) * (1 + 1e-12));
  }
}

TEST_CASE("Ito isometry for the projected noise", "[noise_grid][property]") {
  // X = sum (Pi g)_{nj} R_j^n has variance ||Pi g||^2 for g = eps_1(y).
  const NoiseDims dims{4, 4, 1.0};
  const Matrix pig = project_pi([](double, double y) { return eigenfunction(1, y); }, dims);
  const double expected = std::pow(piecewise_constant_norm(pig, dims), 2);
  const int samples = 10000;
  std::vector<double> xs;
  for (int i = 0; i < samples; ++i) {
    const NoiseGrid g = sample(dims, 1000 + static_cast<std::uint64_t>(i));
    xs.push_back(pig.cwiseProduct(Matrix(g.increments())).sum());
  }
  double mean = 0.0;
  for (double x : xs)
    mean += x / samples;
  double var = 0.0, fourth = 0.0;
  for (double x : xs) {
    var += (x - mean) * (x - mean) / (samples - 1);
    fourth += std::pow(x - mean, 4) / samples;
  }
  const double se = std::sqrt((fourth - var * var) / samples);
  CHECK(std::abs(var - expected) < 3.0 * se);
}

TEST_CASE("cell weights", "[noise_grid]") {
  CHECK_THAT(cell_weight(1, 1, 1), WithinRel(2.0 * std::sqrt(2.0) / pi, 1e-15));
  CHECK_THAT(cell_weight(1, 1, 1), WithinAbs(0.900316, 1e-6));
  CHECK_THAT(cell_weight(2, 1, 2), WithinRel(std::sqrt(2.0) / pi, 1e-15));
  CHECK_THAT(cell_weight(2, 2, 2), WithinRel(-std::sqrt(2.0) / pi, 1e-15));

  const auto rule = composite_gauss<8>(0.0, 1.0, 64);
  for (int J : {1, 2, 3, 7, 16}) {
    const CellWeightTable t = mode_cell_weights(40, J);
    for (int k = 1; k <= 40; ++k) {
      double direct = 0.0, squares = 0.0;
      for (int j = 1; j <= J; ++j) {
        const double a = double(j - 1) / J, b = double(j) / J;
        const double quad = (b - a) * rule.integrate([&](double u) { return eigenfunction(k, a + u * (b - a)); });
        CHECK_THAT(t(k, j), WithinAbs(quad, 1e-12));
        direct += t(k, j);
        squares += t(k, j) * t(k, j);
      }
      CHECK_THAT(direct, WithinAbs(std::sqrt(2.0) * (1.0 - std::cos(k * pi)) / (k * pi), 1e-14));
      CHECK_THAT(cell_weight_square_sum(k, J), WithinAbs(squares, 1e-14));
      CHECK(squares <= 1.0);
    }
  }
}

TEST_CASE("time overlap integrals", "[noise_grid]") {
  const NoiseDims dims{8, 4, 1.0};
  CHECK(time_overlap_integral(3, 5, 0.5, dims) == 0.0);
  CHECK(time_overlap_integral(3, 5, 0.4, dims) == 0.0);

  std::mt19937_64 gen(77);
  std::uniform_int_distribution<int> mode(1, 30), cell(1, 8);
  std::uniform_real_distribution<double> time(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = mode(gen), n = cell(gen);
    const double t = time(gen);
    const double lo = dims.time_node(n - 1);
    const double hi = std::min(t, dims.time_node(n));
    const double mu = SpectralMode(k).eigenvalue();
    double quad = 0.0;
    if (t > lo)
      quad = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
          [&](double s) { return std::exp(-mu * (t - s)); }, lo, hi, 15, 1e-14);
    CHECK_THAT(time_overlap_integral(k, n, t, dims), WithinAbs(quad, 1e-12));
  }

  for (int k : {1, 4, 25}) {
    for (double t : {0.05, 0.5, 0.8125, 1.0}) {
      double sum = 0.0, squares = 0.0;
      for (int n = 1; n <= dims.n_star; ++n) {
        const double I = time_overlap_integral(k, n, t, dims);
        sum += I;
        squares += I * I;
      }
      const double mu = SpectralMode(k).eigenvalue();
      CHECK_THAT(sum, WithinRel(-std::expm1(-mu * t) / mu, 1e-13));
      CHECK_THAT(time_overlap_square_sum(k, t, dims), WithinRel(squares, 1e-12));
    }
  }
}

TEST_CASE("step/cell overlaps", "[noise_grid]") {
  CHECK(overlap_length(1, 3, 1, 2, 1.0) == Catch::Approx(1.0 / 3.0));
  CHECK(overlap_length(2, 3, 1, 2, 1.0) == Catch::Approx(1.0 / 6.0));
  CHECK(overlap_length(2, 3, 2, 2, 1.0) == Catch::Approx(1.0 / 6.0));
  CHECK(overlap_length(3, 3, 1, 2, 1.0) == 0.0);

  for (auto [M, N] : {std::pair{3, 2}, {7, 5}, {8, 32}, {64, 4}, {12, 12}}) {
    std::vector<double> per_step(static_cast<std::size_t>(M), 0.0);
    std::vector<double> per_cell(static_cast<std::size_t>(N), 0.0);
    int last_l = 0, last_n = 0;
    for_each_overlap(M, N, 2.0, [&](int l, int n, double len) {
      CHECK((l > last_l || (l == last_l && n > last_n)));
      last_l = l;
      last_n = n;
      per_step[static_cast<std::size_t>(l - 1)] += len;
      per_cell[static_cast<std::size_t>(n - 1)] += len;
    });
    for (double s : per_step)
      CHECK_THAT(s, WithinRel(2.0 / M, 1e-14));
    for (double c : per_cell)
      CHECK_THAT(c, WithinRel(2.0 / N, 1e-14));
  }
}
