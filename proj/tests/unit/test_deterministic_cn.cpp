#include <catch2/catch_amalgamated.hpp>

#include "stochheat/deterministic_cn.hpp"

#include <random>

using namespace stochheat;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("amplification factors", "[deterministic_cn]") {
  const double dtau = 0.1;
  const double mu = 7.0;
  CHECK_THAT(amplification(mu, 1, dtau), WithinRel(1.0 / (1.0 + 0.35), 1e-15));
  CHECK_THAT(amplification(mu, 3, dtau), WithinRel(0.65 * 0.65 / std::pow(1.35, 3), 1e-14));
  for (int m = 1; m <= 10; ++m)
    CHECK(amplification(0.0, m, dtau) == 1.0);
  const Vector seq = amplification_sequence(mu, 12, dtau);
  for (int m = 1; m <= 12; ++m)
    CHECK_THAT(seq(m - 1), WithinRel(amplification(mu, m, dtau), 1e-13));
  CHECK_THROWS(amplification(-1.0, 1, dtau));
  CHECK_THROWS(amplification(1.0, 0, dtau));
}

TEST_CASE("amplification is bounded by one", "[deterministic_cn][property]") {
  for (int e = -3; e <= 6; ++e) {
    for (double f : {1.0, 2.5, 5.0}) {
      const double rho = f * std::pow(10.0, e);
      const double dtau = 1e-3;
      const double mu = 2.0 * rho / dtau;
      const Vector r = amplification_sequence(mu, 256, dtau);
      CHECK(r.cwiseAbs().maxCoeff() <= 1.0);
      CHECK(std::isfinite(amplification(mu, 256, dtau)));
    }
  }
}

TEST_CASE("modified CN, spectral", "[deterministic_cn]") {
  const double dtau = 0.05;
  const SpectralField one = modified_cn_spectral(SpectralField::mode(1, 1), 1, dtau)[1];
  CHECK_THAT(one.coeff(1), WithinRel(1.0 / (1.0 + dtau * pi * pi / 2.0), 1e-15));

  std::mt19937_64 gen(21);
  std::normal_distribution<double> normal;
  Vector c(20);
  for (auto &x : c)
    x = normal(gen);
  const SpectralField v0(c);
  const auto traj = modified_cn_spectral(v0, 30, dtau);
  REQUIRE(traj.steps() == 30);
  CHECK(traj.time(30) == Catch::Approx(1.5));
  for (int m = 1; m <= 30; ++m) {
    for (int k = 1; k <= 20; ++k)
      CHECK_THAT(traj[m].coeff(k),
                 WithinAbs(amplification(SpectralMode(k).eigenvalue(), m, dtau) * v0.coeff(k), 1e-14));
    CHECK(traj[m].l2_norm() <= traj[m - 1].l2_norm() * (1 + 1e-15));
  }
}

TEST_CASE("modified CN, finite elements", "[deterministic_cn]") {
  const Mesh mesh(24);
  const FemSystem sys = assemble(mesh);
  const FemEigenBasis basis = generalized_eigen(sys);
  const double dtau = 0.02;
  const int M = 40;

  const auto zero = modified_cn_fem(Vector::Zero(sys.dimension()), sys, M, dtau);
  for (int m = 0; m <= M; ++m)
    CHECK(zero[m].cwiseAbs().maxCoeff() == 0.0);

  // Eigen-expansion oracle.
  Vector c(5);
  c << 1.0, -0.5, 0.25, 0.8, -0.3;
  const auto traj = modified_cn_fem(SpectralField(c), sys, M, dtau);
  const Vector coords = basis.coordinates(traj[0], sys);
  for (int m = 1; m <= M; ++m) {
    Vector expected = Vector::Zero(sys.dimension());
    for (int p = 0; p < basis.size(); ++p)
      expected += amplification(basis.values(p), m, dtau) * coords(p) * basis.vectors.col(p);
    CHECK((traj[m] - expected).cwiseAbs().maxCoeff() < 1e-9);
  }

  // Discrete energy decay.
  for (int m = 1; m <= M; ++m)
    CHECK(h1_seminorm(traj[m], sys) <= h1_seminorm(traj[m - 1], sys) * (1 + 1e-14));
}

TEST_CASE("exact heat solution", "[deterministic_cn]") {
  const SpectralField v0 = SpectralField::mode(2, 3);
  CHECK_THAT(exact_heat_solution(v0, 0.1).coeff(2), WithinRel(std::exp(-0.4 * pi * pi), 1e-15));
  const auto traj = exact_heat_trajectory(v0, 4, 0.25);
  CHECK(traj.steps() == 4);
  CHECK(traj[0].coeffs() == v0.coeffs());
}

TEST_CASE("discrete L2(L2) distances", "[deterministic_cn]") {
  const SpectralField v0 = SpectralField::mode(1, 2);
  const auto a = modified_cn_spectral(v0, 8, 0.125);
  CHECK(l2t_error(a, a) == 0.0);
  CHECK(l2t_error(a, a, TimeNorm::midpoint) == 0.0);
  CHECK_THROWS(l2t_error(a, modified_cn_spectral(v0, 4, 0.25)));
  CHECK_THROWS(l2t_error(a, modified_cn_spectral(v0, 8, 0.1)));

  // Embedding a FEM member into L2 is exact: compare eps_k against its own projection.
  const Mesh mesh(16);
  const FemSystem sys = assemble(mesh);
  const SpectralField f = SpectralField::mode(3, 3);
  const Vector pf = l2_project(f, sys);
  const Matrix G = sine_hat_matrix(3, mesh);
  // ||f - P_h f||^2 = ||f||^2 - ||P_h f||^2 by orthogonality.
  CHECK_THAT(spectral_nodal_distance2(f, pf, sys, G),
             WithinAbs(1.0 - sys.mass.quadratic_form(pf), 1e-14));
}

TEST_CASE("deterministic CN rates", "[deterministic_cn][rate]") {
  const SpectralField v0 = SpectralField::mode(1, 1);
  std::vector<double> taus, errs;
  for (int e = 4; e <= 10; ++e) {
    const double dtau = std::ldexp(1.0, -e);
    const int M = 1 << e;
    taus.push_back(dtau);
    errs.push_back(l2t_error(modified_cn_spectral(v0, M, dtau), exact_heat_trajectory(v0, M, dtau)));
  }
  const double slope = std::log(errs.front() / errs.back()) / std::log(taus.front() / taus.back());
  CHECK(slope >= 0.45);

  std::vector<double> hs, fem;
  const double dtau = 1.0 / 64;
  const auto reference = modified_cn_spectral(v0, 64, dtau);
  for (int J : {8, 16, 32, 64, 128}) {
    const FemSystem sys = assemble(Mesh(J));
    hs.push_back(1.0 / J);
    fem.push_back(l2t_error(reference, modified_cn_fem(v0, sys, 64, dtau), sys, TimeNorm::damped_midpoint));
  }
  const double fem_slope = std::log(fem.front() / fem.back()) / std::log(hs.front() / hs.back());
  CHECK(fem_slope >= 1.8);
}
