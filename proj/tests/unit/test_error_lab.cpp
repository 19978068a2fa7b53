#include <catch2/catch_amalgamated.hpp>

#include "stochheat/error_lab.hpp"
#include "stochheat/verification/oracles.hpp"

using namespace stochheat;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("modeling error, closed form against direct sums", "[error_lab]") {
  for (const NoiseDims dims : {NoiseDims{2, 2, 1.0}, NoiseDims{4, 8, 0.5}, NoiseDims{16, 3, 2.0}}) {
    for (double frac : {0.3, 0.5, 1.0}) {
      const double t = frac * dims.horizon;
      CHECK_THAT(modeling_error_exact(t, dims, 300).value,
                 WithinRel(verification::modeling_error_direct_sum(t, dims, 300), 1e-12));
    }
    CHECK(modeling_error_exact(0.0, dims, 50).value == 0.0);
    for (int k = 1; k <= 200; ++k)
      CHECK(modeling_error_mode(k, dims.horizon, dims) >= 0.0);
  }
}

TEST_CASE("modeling error, closed form against quadrature", "[error_lab][oracle]") {
  const NoiseDims dims{2, 2, 1.0};
  verification::OracleResolution res;
  res.space_panels_per_cell = 32;
  for (int k : {1, 2, 3, 7, 40}) {
    for (double t : {1.0, 0.75, 0.4}) {
      const double q = verification::modeling_error_mode_quadrature(k, t, dims, res);
      CHECK_THAT(modeling_error_mode(k, t, dims), WithinRel(q, 1e-9));
    }
  }

  // The orthonormality shortcut in x agrees with full (s, y, x) quadrature.
  verification::OracleResolution coarse;
  coarse.space_panels_per_cell = 8;
  coarse.min_time_panel = 1e-8;
  coarse.x_points = 16;
  const double full = verification::modeling_error_quadrature_3d(1.0, dims, 6, coarse);
  const double shortcut = verification::modeling_error_quadrature(1.0, dims, 6, coarse);
  CHECK_THAT(full, WithinRel(shortcut, 1e-9));
  CHECK_THAT(full, WithinRel(modeling_error_exact(1.0, dims, 6).value, 1e-8));
}

TEST_CASE("modeling error tail warning", "[error_lab]") {
  const NoiseDims dims{4, 4, 1.0};
  const ModelingError few = modeling_error_exact(1.0, dims, 10);
  CHECK(few.warning.has_value());
  CHECK_THAT(few.tail_estimate, WithinRel(1.0 / (2.0 * pi * pi * 10.0), 1e-12));
  const int K = truncation_for_tolerance(2e-8);
  CHECK_FALSE(modeling_error_exact(1.0, dims, K).warning.has_value());
}

TEST_CASE("modeling error decreases on nested space grids", "[error_lab][property]") {
  const int K = 20000;
  double prev = std::numeric_limits<double>::infinity();
  for (int J = 2; J <= 256; J *= 2) {
    const double z = modeling_error_exact(1.0, {1024, J, 1.0}, K).value;
    CHECK(z <= prev);
    prev = z;
  }
}

TEST_CASE("discretization errors match coefficient maps", "[error_lab]") {
  const NoiseDims dims{8, 4, 1.0};
  const int M = 6, K = 16;
  const Mesh mesh(6);
  const FemSystem sys = assemble(mesh);
  for (int m : {0, 1, 4, 6}) {
    const double tau = m * dims.horizon / M;
    const CoefficientMap reg = coefficient_map(ObservableSpec::regularized(tau, K, 1.0), dims);
    const CoefficientMap td = coefficient_map(ObservableSpec::time_discrete(m, M, K, 1.0), dims);
    const CoefficientMap fe = coefficient_map(ObservableSpec::fem(m, M, mesh, 1.0), dims);
    const double tdr = tdr_error_exact(m, dims, M, K);
    const double sdr = sdr_error_exact(m, dims, M, sys, K);
    const double total = total_error_exact(m, dims, M, sys, K);
    CHECK_THAT(tdr * tdr, WithinAbs((reg - td).second_moment(), 1e-13));
    CHECK_THAT(sdr * sdr, WithinAbs((td - fe).second_moment(), 1e-13));
    CHECK_THAT(total * total, WithinAbs((reg - fe).second_moment(), 1e-13));
    CHECK(total <= tdr + sdr + 1e-15);
    if (m == 0) {
      CHECK(tdr == 0.0);
      CHECK(sdr == 0.0);
      CHECK(total == 0.0);
    }
  }
}

TEST_CASE("discretization errors shrink under refinement", "[error_lab][property]") {
  const NoiseDims dims{16, 16, 1.0};
  const int K = 64;
  double prev = std::numeric_limits<double>::infinity();
  for (int M : {4, 8, 16, 32, 64}) {
    const double e = tdr_error_exact(M, dims, M, K);
    CHECK(e < prev);
    prev = e;
  }
  prev = std::numeric_limits<double>::infinity();
  for (int J : {4, 8, 16, 32, 64}) {
    const double e = sdr_error_exact(16, dims, 16, assemble(Mesh(J)), K);
    CHECK(e < prev);
    prev = e;
  }
  const double coarse = total_error_exact(8, dims, 8, assemble(Mesh(4)), K);
  const double fine = total_error_exact(64, dims, 64, assemble(Mesh(64)), K);
  CHECK(fine < 0.5 * coarse);
}

TEST_CASE("Monte Carlo agrees with the exact errors", "[error_lab][statistical]") {
  const NoiseDims dims{8, 8, 1.0};
  const int M = 8, K = 32;
  const Mesh mesh(8);
  const FemSystem sys = assemble(mesh);
  const auto reg = ObservableSpec::regularized(1.0, K, 1.0);
  const auto td = ObservableSpec::time_discrete(M, M, K, 1.0);
  const auto fe = ObservableSpec::fem(M, M, mesh, 1.0);

  const McEstimate tdr = mc_error(reg, td, dims, 1000, 0x5eed);
  CHECK(std::abs(tdr.mean - std::pow(tdr_error_exact(M, dims, M, K), 2)) < 3.0 * tdr.stderr_);
  const McEstimate sdr = mc_error(td, fe, dims, 1000, 0x5eed);
  CHECK(std::abs(sdr.mean - std::pow(sdr_error_exact(M, dims, M, sys, K), 2)) < 3.0 * sdr.stderr_);
  const McEstimate total = mc_error(reg, fe, dims, 1000, 0x5eed);
  CHECK(std::abs(total.mean - std::pow(total_error_exact(M, dims, M, sys, K), 2)) < 3.0 * total.stderr_);

  // u^ at T on a 4 x 4 grid.
  const NoiseDims small{4, 4, 1.0};
  const auto u = ObservableSpec::regularized(1.0, 16, 1.0);
  const McEstimate second = mc_error(u, ObservableSpec::zero(1.0), small, 1000, 99);
  CHECK(std::abs(second.mean - coefficient_map(u, small).second_moment()) < 3.0 * second.stderr_);
}

TEST_CASE("Monte Carlo estimator contract", "[error_lab]") {
  const NoiseDims dims{4, 4, 1.0};
  const McEstimate zero = mc_error(ObservableSpec::zero(1.0), ObservableSpec::zero(1.0), dims, 10, 1);
  CHECK(zero.mean == 0.0);
  CHECK(zero.stderr_ == 0.0);
  CHECK_THROWS(mc_error(ObservableSpec::zero(1.0), ObservableSpec::zero(1.0), dims, 1, 1));

  const auto u = ObservableSpec::regularized(1.0, 8, 1.0);
  const McEstimate a = mc_error(u, ObservableSpec::zero(1.0), dims, 50, 12345);
  const McEstimate b = mc_error(u, ObservableSpec::zero(1.0), dims, 50, 12345);
  CHECK(a.mean == b.mean);
  CHECK(a.stderr_ == b.stderr_);

  // Sample i uses seed base ^ i.
  double manual = 0.0;
  for (std::uint64_t i = 0; i < 50; ++i)
    manual += regularized_exact(sample(dims, 12345 ^ i), 8, 1.0).coeffs().squaredNorm() / 50.0;
  CHECK_THAT(a.mean, WithinRel(manual, 1e-12));
}

TEST_CASE("doubling the samples halves the estimator variance", "[error_lab][statistical]") {
  const NoiseDims dims{4, 4, 1.0};
  const auto u = ObservableSpec::regularized(1.0, 8, 1.0);
  auto meta_variance = [&](int samples) {
    std::vector<double> means;
    for (std::uint64_t trial = 0; trial < 60; ++trial)
      means.push_back(mc_error(u, ObservableSpec::zero(1.0), dims, samples, (trial + 1) << 20).mean);
    double mean = 0.0;
    for (double m : means)
      mean += m / means.size();
    double var = 0.0;
    for (double m : means)
      var += (m - mean) * (m - mean) / (means.size() - 1);
    return var;
  };
  const double ratio = meta_variance(40) / meta_variance(80);
  CHECK(ratio > 1.3);
  CHECK(ratio < 3.0);
}

TEST_CASE("rate fitting", "[error_lab]") {
  std::vector<RatePoint> pts;
  for (int e = 1; e <= 6; ++e) {
    const double r = std::ldexp(1.0, -e);
    pts.push_back({r, 3.0 * std::sqrt(r)});
  }
  const RateFit fit = fit_rate(pts);
  CHECK_THAT(fit.slope, WithinAbs(0.5, 1e-14));
  CHECK_THAT(fit.intercept, WithinAbs(std::log(3.0), 1e-13));
  CHECK(fit.residual < 1e-13);

  std::vector<RatePoint> flat{{0.5, 2.0}, {0.25, 2.0}, {0.125, 2.0}};
  CHECK_THAT(fit_rate(flat).slope, WithinAbs(0.0, 1e-15));

  // Synthetic 1% multiplicative noise around r^0.25.
  const double noise[] = {0.01, -0.01, 0.004, -0.007, 0.01, -0.003, 0.006};
  std::vector<RatePoint> noisy;
  for (int e = 0; e < 7; ++e) {
    const double r = std::ldexp(1.0, -(e + 3));
    noisy.push_back({r, std::pow(r, 0.25) * (1.0 + noise[e])});
  }
  CHECK(std::abs(fit_rate(noisy).slope - 0.25) < 0.02);

  CHECK_THROWS(fit_rate({{0.5, 1.0}, {0.25, 0.5}}));
  CHECK_THROWS(fit_rate({{0.5, 1.0}, {0.25, 0.0}, {0.1, 0.2}}));
  CHECK_THROWS(fit_rate({{-0.5, 1.0}, {0.25, 0.3}, {0.1, 0.2}}));
}
