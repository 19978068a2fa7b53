#pragma once

// Acceptance criteria as runnable checks. Each criterion reports PASS/FAIL on
// one line together with its measured value and wall time.

#include "stochheat/study.hpp"
#include "stochheat/verification/oracles.hpp"

#include <chrono>
#include <functional>
#include <random>

namespace stochheat::verification {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool value_ok = false;
  std::string detail;
  double seconds = 0.0;
  double budget = 0.0; // seconds; 0 means no runtime limit

  bool passed() const { return value_ok && (budget <= 0.0 || seconds < budget); }

  std::string line() const {
    char time[96];
    if (budget > 0.0)
      std::snprintf(time, sizeof time, "%.1f s, limit %.0f s", seconds, budget);
    else
      std::snprintf(time, sizeof time, "%.1f s", seconds);
    return std::string(passed() ? "PASS" : "FAIL") + " [" + std::to_string(id) + "] " + name + ": " +
           detail + " (" + time + ")";
  }
};

namespace detail {

inline std::string fmt(const char *format, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, format, a);
  return buf;
}

inline CriterionResult timed(int id, std::string name, double budget,
                             const std::function<std::pair<bool, std::string>()> &body) {
  CriterionResult r{id, std::move(name), false, "", 0.0, budget};
  const auto start = std::chrono::steady_clock::now();
  try {
    auto [ok, detail] = body();
    r.value_ok = ok;
    r.detail = std::move(detail);
  } catch (const std::exception &e) {
    r.value_ok = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

inline std::string slope_detail(const ErrorReport &report) {
  std::string d = "slope=" + fmt("%.4f", report.fit.slope);
  if (report.rows.size() > 4) {
    ErrorReport finest = report;
    finest.refit(static_cast<int>(report.rows.size()) - 4, 4);
    d += " (finest-4 slope " + fmt("%.4f", finest.fit.slope) + ")";
  }
  return d;
}

inline std::pair<bool, std::string> slope_in(const ErrorReport &report, double lo, double hi) {
  const double s = report.fit.slope;
  const bool ok = report.window_size >= 3 && s >= lo && s <= hi;
  std::string range = hi < 1e300 ? "[" + fmt("%g", lo) + ", " + fmt("%g", hi) + "]" : ">= " + fmt("%g", lo);
  return {ok, slope_detail(report) + ", required " + range};
}

} // namespace detail

// ---------------------------------------------------------------------------
// Configurations.

/// Space sweep of the deterministic scheme: single dtau, mesh sweep, damped midpoint norm.
inline StudyConfig deterministic_fem_config() {
  StudyConfig c = StudyConfig::defaults(StudyKind::deterministic_cn);
  c.dtau = LevelList::single(6);
  c.h = LevelList::range(3, 7);
  return c;
}

// ---------------------------------------------------------------------------
// Criteria.

inline CriterionResult criterion_model_space() {
  return detail::timed(1, "modeling error, space rate", 60.0, [] {
    return detail::slope_in(run_study(StudyConfig::defaults(StudyKind::model_space)), 0.42, 0.58);
  });
}

inline CriterionResult criterion_model_time() {
  return detail::timed(2, "modeling error, time rate", 60.0, [] {
    return detail::slope_in(run_study(StudyConfig::defaults(StudyKind::model_time)), 0.20, 0.30);
  });
}

inline CriterionResult criterion_tdr() {
  return detail::timed(3, "time-discretization rate", 120.0, [] {
    return detail::slope_in(run_study(StudyConfig::defaults(StudyKind::tdr)), 0.20, 1e308);
  });
}

inline CriterionResult criterion_sdr() {
  return detail::timed(4, "space-discretization rate", 300.0, [] {
    return detail::slope_in(run_study(StudyConfig::defaults(StudyKind::sdr)), 0.42, 0.62);
  });
}

/// total <= tdr + sdr on the configurations of the tdr and sdr sweeps; the
/// tdr sweep is paired with the finest sdr mesh.
inline CriterionResult criterion_total() {
  return detail::timed(5, "total error triangle inequality", 0.0, [] {
    struct Case {
      NoiseDims dims;
      int M;
      int intervals;
      int K;
    };
    std::vector<Case> cases;
    const StudyConfig tdr = StudyConfig::defaults(StudyKind::tdr);
    const StudyConfig sdr = StudyConfig::defaults(StudyKind::sdr);
    const int finest_h = sdr.h.exponents.back();
    const NoiseDims tdr_dims{1 << tdr.dt.exponents[0], 1 << tdr.dx.exponents[0], 1.0};
    for (int e : tdr.dtau.exponents)
      cases.push_back({tdr_dims, 1 << e, 1 << finest_h, tdr.k_policy.resolve(tdr_dims.j_star)});
    const NoiseDims sdr_dims{1 << sdr.dt.exponents[0], 1 << sdr.dx.exponents[0], 1.0};
    for (int e : sdr.h.exponents)
      cases.push_back({sdr_dims, 1 << sdr.dtau.exponents[0], 1 << e, sdr.k_policy.resolve(sdr_dims.j_star)});

    double worst = -std::numeric_limits<double>::infinity();
    bool ok = true;
    for (const auto &c : cases) {
      const FemSystem sys = assemble(Mesh(c.intervals));
      const double t = tdr_error_exact(c.M, c.dims, c.M, c.K);
      const double s = sdr_error_exact(c.M, c.dims, c.M, sys, c.K);
      const double total = total_error_exact(c.M, c.dims, c.M, sys, c.K);
      const double excess = (total - (t + s)) / (t + s);
      worst = std::max(worst, excess);
      ok = ok && excess <= 1e-12;
    }
    return std::pair{ok, std::to_string(cases.size()) + " configurations, max (total - tdr - sdr)/(tdr + sdr) = " +
                             detail::fmt("%.3e", worst) + ", required <= 1e-12"};
  });
}

inline CriterionResult criterion_modeling_oracle() {
  return detail::timed(6, "modeling error oracle equivalence", 30.0, [] {
    const NoiseDims dims{2, 2, 1.0};
    OracleResolution res;
    res.space_panels_per_cell = 64;
    const double quadrature = modeling_error_quadrature_3d(1.0, dims, 200, res);
    const double exact = modeling_error_exact(1.0, dims, 200).value;
    const double rel = std::abs(quadrature - exact) / exact;
    return std::pair{rel <= 1e-6, "Z(T)=" + detail::fmt("%.15g", exact) + ", quadrature " +
                                      detail::fmt("%.15g", quadrature) + ", relative error " +
                                      detail::fmt("%.2e", rel) + ", required <= 1e-6"};
  });
}

inline CriterionResult criterion_mc_oracle() {
  return detail::timed(7, "Monte Carlo oracle equivalence", 120.0, [] {
    const NoiseDims dims{32, 32, 1.0};
    const int K = 128, M = 64, samples = 1000;
    const Mesh mesh(32);
    const std::pair<const char *, ObservableSpec> specs[] = {
        {"u^", ObservableSpec::regularized(1.0, K, 1.0)},
        {"U^M", ObservableSpec::time_discrete(M, M, K, 1.0)},
        {"U_h^M", ObservableSpec::fem(M, M, mesh, 1.0)},
    };
    bool ok = true;
    std::string d;
    std::uint64_t seed = 0x7e57;
    for (const auto &[name, spec] : specs) {
      const double exact = coefficient_map(spec, dims).second_moment();
      const McEstimate mc = mc_error(spec, ObservableSpec::zero(1.0), dims, samples, seed++);
      const double z = std::abs(mc.mean - exact) / mc.stderr_;
      ok = ok && z <= 3.0;
      d += std::string(d.empty() ? "" : "; ") + name + " |MC - exact|/se=" + detail::fmt("%.2f", z);
    }
    return std::pair{ok, d + ", required <= 3"};
  });
}

inline CriterionResult criterion_deterministic_cn() {
  return detail::timed(8, "deterministic CN rates", 60.0, [] {
    const ErrorReport time = run_study(StudyConfig::defaults(StudyKind::deterministic_cn));
    double C = 0.0;
    for (const auto &r : time.rows)
      C = std::max(C, r.error_exact / std::sqrt(*r.dtau));
    const ErrorReport space = run_study(deterministic_fem_config());
    const bool ok = time.fit.slope >= 0.45 && space.fit.slope >= 1.8;
    return std::pair{ok, "time slope=" + detail::fmt("%.4f", time.fit.slope) +
                             " (max err/dtau^0.5 " + detail::fmt("%.3g", C) +
                             "), required >= 0.45; FEM slope=" + detail::fmt("%.4f", space.fit.slope) +
                             ", required >= 1.8"};
  });
}

inline CriterionResult criterion_invariants() {
  return detail::timed(9, "invariant suite", 60.0, [] {
    std::vector<std::string> failed;
    auto check = [&](bool ok, const char *what) {
      if (!ok)
        failed.emplace_back(what);
    };

    // |r_m(mu)| <= 1.
    bool bounded = true;
    for (double dtau : {1e-4, 1e-2, 0.5, 1.0})
      for (int i = 0; i <= 200; ++i) {
        const double mu = std::pow(10.0, -2.0 + 10.0 * i / 200.0);
        for (int m = 1; m <= 100; ++m)
          bounded = bounded && std::abs(amplification(mu, m, dtau)) <= 1.0;
      }
    check(bounded, "amplification bound");

    // Pi is an L2 contraction.
    {
      std::mt19937_64 gen(31);
      std::normal_distribution<double> normal;
      std::uniform_int_distribution<int> freq(1, 9);
      const NoiseDims dims{4, 4, 1.0};
      const auto rule = composite_gauss<8>(0.0, 1.0, 16);
      bool contraction = true;
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
        contraction = contraction && piecewise_constant_norm(project_pi(g, dims), dims) <= std::sqrt(norm2) * (1 + 1e-12);
      }
      check(contraction, "projection contraction");
    }

    // H1 energy decay of modified CN-FEM.
    {
      std::mt19937_64 gen(7);
      std::normal_distribution<double> normal;
      const FemSystem sys = assemble(Mesh(32));
      bool decays = true;
      for (int trial = 0; trial < 5; ++trial) {
        Vector v0(sys.dimension());
        for (Eigen::Index i = 0; i < v0.size(); ++i)
          v0(i) = normal(gen);
        const auto traj = modified_cn_fem(v0, sys, 50, 0.01);
        for (int m = 1; m <= 50; ++m)
          decays = decays && h1_seminorm(traj[m], sys) <= h1_seminorm(traj[m - 1], sys) * (1 + 1e-14);
      }
      check(decays, "H1 energy decay");
    }

    // Nodal exactness of the discrete elliptic solve for f = 1.
    {
      bool exact = true;
      for (int J : {4, 9, 32, 128}) {
        const FemSystem sys = assemble(Mesh(J));
        const Vector v = elliptic_solve_discrete([](double) { return 1.0; }, sys);
        for (int i = 1; i <= sys.dimension(); ++i) {
          const double x = sys.mesh.node(i);
          exact = exact && std::abs(v(i - 1) - 0.5 * (x * x - x)) <= 1e-10;
        }
      }
      check(exact, "nodal exactness");
    }

    // Noise variance and coarsening consistency.
    {
      const NoiseGrid g = sample(400, 250, 1.0, 2024);
      const double var = g.increments().squaredNorm() / static_cast<double>(g.increments().size());
      check(std::abs(var / g.dims().cell_area() - 1.0) < 0.05, "noise variance");

      const NoiseGrid fine = sample(64, 64, 1.0, 5);
      const NoiseGrid direct = coarsen(fine, 4, 2);
      const NoiseGrid nested = coarsen(coarsen(fine, 2, 2), 2, 1);
      const double scale = Matrix(direct.increments()).cwiseAbs().maxCoeff();
      check(direct.dims() == nested.dims() &&
                (Matrix(direct.increments()) - Matrix(nested.increments())).cwiseAbs().maxCoeff() <= 1e-15 * scale,
            "coarsening consistency");
      bool sums = true;
      for (int n = 1; n <= direct.n_star(); ++n)
        for (int j = 1; j <= direct.j_star(); ++j) {
          double s = 0.0;
          for (int a = 1; a <= 4; ++a)
            for (int b = 1; b <= 2; ++b)
              s += fine.increment(4 * (n - 1) + a, 2 * (j - 1) + b);
          sums = sums && std::abs(s - direct.increment(n, j)) <= 1e-15 * scale;
        }
      check(sums, "coarse block sums");
      const NoiseGrid big = coarsen(sample(512, 400, 1.0, 77), 4, 2);
      const double cvar = big.increments().squaredNorm() / static_cast<double>(big.increments().size());
      check(std::abs(cvar / big.dims().cell_area() - 1.0) < 0.05, "coarse variance");
    }

    // Byte-identical CSV under a fixed seed.
    {
      StudyConfig c = StudyConfig::defaults(StudyKind::tdr);
      c.dt = LevelList::single(4);
      c.dx = LevelList::single(4);
      c.dtau = LevelList::range(2, 4);
      c.samples = 20;
      c.seed = 424242;
      auto csv = [&] {
        std::ostringstream out;
        write_csv(out, run_study(c));
        return out.str();
      };
      check(csv() == csv(), "byte-identical CSV");
    }

    std::string d = failed.empty() ? "all checks hold" : "failed:";
    for (const auto &f : failed)
      d += " " + f + ";";
    return std::pair{failed.empty(), d};
  });
}

/// Criteria run by the `selftest` subcommand: oracle equivalence and invariants.
inline std::vector<std::function<CriterionResult()>> selftest_criteria() {
  return {criterion_modeling_oracle, criterion_mc_oracle, criterion_invariants};
}

inline std::vector<std::function<CriterionResult()>> all_criteria() {
  return {criterion_model_space, criterion_model_time, criterion_tdr,      criterion_sdr,
          criterion_total,       criterion_modeling_oracle, criterion_mc_oracle, criterion_deterministic_cn,
          criterion_invariants};
}

/// Runs the criteria, printing one line per criterion; true if all passed.
inline bool run_criteria(const std::vector<std::function<CriterionResult()>> &criteria, std::ostream &out) {
  bool all = true;
  for (const auto &criterion : criteria) {
    const CriterionResult r = criterion();
    out << r.line() << std::endl;
    all = all && r.passed();
  }
  return all;
}

} // namespace stochheat::verification
