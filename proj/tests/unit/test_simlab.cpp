#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "overfit/error.hpp"
#include "overfit/numerics/rng.hpp"
#include "overfit/simlab/simlab.hpp"

using namespace overfit;
using simlab::ScatterStats;

namespace {

Eigen::VectorXd gaussian_vector(Eigen::Index n, std::uint64_t seed) {
  numerics::CounterRng rng(seed);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = numerics::standard_normal(rng);
  return v;
}

simlab::SimulationPlan weibull_plan() {
  simlab::SimulationPlan p;
  p.family = models::Family::WeibullPH;
  p.N = 200;
  p.nuisance0.rho = 0.5;
  p.nuisance0.lambda = 1.0 / 9.0;
  p.base_seed = 20240611;
  return p;
}

std::string csv(const simlab::SimulationSummary& s) {
  std::ostringstream os;
  simlab::write_summary_csv(os, s);
  return os.str();
}

}  // namespace

TEST_CASE("scatter_stats: exact recovery and scaling") {
  const Eigen::VectorXd b0 = gaussian_vector(50, 3);
  ScatterStats s = simlab::scatter_stats(b0, b0);
  CHECK(s.kappa == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.delta == doctest::Approx(0.0).epsilon(1e-15));
  s = simlab::scatter_stats(2.0 * b0, b0);
  CHECK(s.kappa == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(s.delta < 1e-14);

  const Eigen::VectorXd bh = 0.7 * b0 + 0.3 * gaussian_vector(50, 4);
  const ScatterStats a = simlab::scatter_stats(bh, b0);
  const ScatterStats c = simlab::scatter_stats(-2.5 * bh, b0);
  CHECK(c.kappa == doctest::Approx(-2.5 * a.kappa).epsilon(1e-13));
  CHECK(c.delta == doctest::Approx(2.5 * a.delta).epsilon(1e-13));
}

TEST_CASE("scatter_stats: synthetic noise orthogonal to beta0 and the constant") {
  const Eigen::Index n = 40;
  const Eigen::VectorXd b0 = gaussian_vector(n, 11);
  Eigen::VectorXd e = gaussian_vector(n, 12);
  // Gram-Schmidt against the constant vector and b0 so that both the slope
  // and the residual SD are known in closed form.
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  Eigen::VectorXd q = b0 - one.dot(b0) * one;
  q.normalize();
  e -= one.dot(e) * one;
  e -= q.dot(e) * q;
  REQUIRE(std::abs(e.sum()) < 1e-12);
  const double kappa0 = 1.37;
  const ScatterStats s = simlab::scatter_stats(kappa0 * b0 + e, b0);
  CHECK(s.kappa == doctest::Approx(kappa0).epsilon(1e-13));
  const double sd = std::sqrt(e.squaredNorm() / (n - 1));
  CHECK(s.delta == doctest::Approx(sd).epsilon(1e-12));
}

TEST_CASE("scatter_stats: invalid input") {
  CHECK_THROWS_AS(simlab::scatter_stats(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(4)), DomainError);
  CHECK_THROWS_AS(simlab::scatter_stats(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)), DomainError);
  CHECK_THROWS_AS(simlab::scatter_stats(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Zero(3)), DomainError);
}

TEST_CASE("mean_se and aggregation exclude failures") {
  const simlab::Stat s = simlab::mean_se({1.0, 2.0, 3.0, 6.0});
  CHECK(s.mean == doctest::Approx(3.0));
  // sample variance 14/3, se = sqrt(14/3/4)
  CHECK(s.se == doctest::Approx(std::sqrt(14.0 / 12.0)));
  CHECK(std::isnan(simlab::mean_se({5.0}).se));

  std::vector<simlab::ReplicateResult> reps(5);
  const double kappa[] = {0.9, 1.1, 99.0, 1.0, 1.3};
  for (int i = 0; i < 5; ++i) {
    reps[i].ok = i != 2;
    reps[i].scatter = {kappa[i], 0.1 * i};
    reps[i].ratios = {static_cast<double>(i), 2.0};
  }
  const simlab::ZetaSummary z = simlab::aggregate(0.2, 4, 20, reps);
  CHECK(z.M == 5);
  CHECK(z.n_failed == 1);
  CHECK(z.n_converged + z.n_failed == z.M);
  CHECK(z.kappa.mean == doctest::Approx((0.9 + 1.1 + 1.0 + 1.3) / 4));
  CHECK(z.delta.mean == doctest::Approx((0.0 + 0.1 + 0.3 + 0.4) / 4));
  REQUIRE(z.ratios.size() == 2);
  CHECK(z.ratios[0].mean == doctest::Approx((0.0 + 1 + 3 + 4) / 4));
  CHECK(z.ratios[1].se == 0.0);
  CHECK_FALSE(z.flagged());
  reps[0].ok = false;
  CHECK(simlab::aggregate(0.2, 4, 20, reps).flagged());
}

TEST_CASE("replicate seeds are pairwise distinct") {
  std::set<std::uint64_t> seen;
  for (std::size_t j = 0; j < 5; ++j)
    for (std::size_t r = 0; r < 2000; ++r) seen.insert(simlab::replicate_seed(7, j, r));
  CHECK(seen.size() == 10000);
}

TEST_CASE("plan validation") {
  simlab::SimulationPlan p = weibull_plan();
  CHECK_THROWS_AS(simlab::validate(p), ConfigError);  // empty grid
  p.zeta_grid = {0.2, 0.1};
  CHECK_THROWS_AS(simlab::validate(p), ConfigError);
  p.zeta_grid = {0.999};
  CHECK_THROWS_AS(simlab::validate(p), ConfigError);  // p = N
  p.zeta_grid = {0.001};
  CHECK_THROWS_AS(simlab::validate(p), ConfigError);  // p = 0
  p.zeta_grid = {0.1};
  p.replicates = simlab::Fixed{1};
  CHECK_THROWS_AS(simlab::validate(p), ConfigError);
  p.replicates = simlab::PerZeta{10.0};
  CHECK_NOTHROW(simlab::validate(p));
  CHECK(simlab::replicates_at(p, 0.1) == 100);
  CHECK(simlab::p_of(p, 0.1) == 20);
  p.nuisance0.rho = -1.0;
  CHECK_THROWS_AS(simlab::validate(p), ConfigError);
}

TEST_CASE("run_plan is deterministic and independent of the thread count") {
  simlab::SimulationPlan p = weibull_plan();
  p.zeta_grid = {0.1, 0.3};
  p.replicates = simlab::Fixed{12};
  const std::string a = csv(simlab::run_plan(p, 1));
  CHECK(a == csv(simlab::run_plan(p, 1)));
  CHECK(a == csv(simlab::run_plan(p, 4)));
  p.base_seed += 1;
  CHECK(a != csv(simlab::run_plan(p, 1)));
  p.base_seed -= 1;
  p.fixed_beta0 = true;
  CHECK(a != csv(simlab::run_plan(p, 1)));
}

TEST_CASE("run_plan: Weibull slope on both scales") {
  simlab::SimulationPlan p = weibull_plan();
  p.zeta_grid = {0.01, 0.45};
  p.replicates = simlab::Fixed{100};
  const simlab::SimulationSummary s = simlab::run_plan(p, 2);
  REQUIRE(s.rows.size() == 2);
  const auto col = [&](const std::string& n) {
    return static_cast<std::size_t>(std::find(s.ratio_names.begin(), s.ratio_names.end(), n) - s.ratio_names.begin());
  };
  const simlab::ZetaSummary& lo = s.rows[0];
  const simlab::ZetaSummary& hi = s.rows[1];
  CHECK(lo.p == 2);
  CHECK(lo.n_failed == 0);
  CHECK(std::abs(lo.ratios[col("kappa_native")].mean - 1.0) < 3 * lo.ratios[col("kappa_native")].se);
  // Log-linear slope stays at 1; the native slope is inflated by 1/f.
  CHECK(std::abs(hi.kappa.mean - 1.0) < 3 * hi.kappa.se);
  const simlab::Stat kn = hi.ratios[col("kappa_native")];
  CHECK((kn.mean - 1.0) / kn.se > 5.0);
}

TEST_CASE("summary CSV round trip") {
  simlab::SimulationPlan p = weibull_plan();
  p.family = models::Family::ExpGammaFrailty;
  p.nuisance0 = {};
  p.nuisance0.theta = 0.5;
  p.zeta_grid = {0.05, 0.1};
  p.replicates = simlab::Fixed{6};
  const simlab::SimulationSummary s = simlab::run_plan(p, 1);
  std::istringstream in(csv(s));
  const simlab::SimulationSummary r = simlab::read_summary_csv(in);
  CHECK(r.family == s.family);
  CHECK(r.ratio_names == s.ratio_names);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[1].kappa.mean == s.rows[1].kappa.mean);
  CHECK(r.rows[1].ratios[0].se == s.rows[1].ratios[0].se);
  CHECK(r.rows[1].n_converged == s.rows[1].n_converged);
  CHECK(csv(r) == csv(s));

  std::istringstream bad("family,zeta,p\nweibull,0.1,2\n");
  CHECK_THROWS_AS(simlab::read_summary_csv(bad), ConfigError);
}

TEST_CASE("c4 matches the mean of a chi distribution") {
  CHECK(simlab::c4(2) == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(1e-14));
  CHECK(simlab::c4(3) == doctest::Approx(std::sqrt(M_PI) / 2.0).epsilon(1e-14));
  CHECK(simlab::c4(1000) == doctest::Approx(1.0 - 1.0 / (4.0 * 999)).epsilon(1e-6));
  // Monte Carlo: residual SE of pure-noise scatters around a fixed beta0.
  const int p = 6;
  const Eigen::VectorXd b0 = gaussian_vector(p, 99);
  double sum = 0.0;
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) sum += simlab::scatter_stats(b0 + gaussian_vector(p, 1000 + r), b0).delta;
  CHECK(sum / reps == doctest::Approx(simlab::c4(p)).epsilon(0.01));
}

TEST_CASE("compare_to_theory on synthetic summaries") {
  const models::Nuisance nu{1.0 / 9.0, 0.5, 0.0};
  const auto theory = simlab::theory_solutions(models::Family::WeibullPH, {0.1, 0.3}, nu);
  REQUIRE(theory[1].converged);
  // Delta is measured on the log-linear scale, where sigma0 = 1/rho0 = 2.
  CHECK(theory[1].v_star / theory[1].nuisance0.sigma ==
        doctest::Approx(rs::solve_rs_weibull(0.3).v_star).epsilon(1e-8));

  simlab::SimulationSummary s;
  s.family = models::Family::WeibullPH;
  s.ratio_names = simlab::ratio_names(s.family, false);
  for (int i = 0; i < 2; ++i) {
    simlab::ZetaSummary z;
    z.zeta = theory[i].zeta;
    z.N = 100;
    z.p = i == 0 ? 10 : 30;
    z.M = 10;
    z.n_converged = 10;
    z.kappa = {*simlab::theory_value("kappa", s.family, theory[i], z.p), 0.01};
    z.delta = {*simlab::theory_value("delta", s.family, theory[i], z.p), 0.01};
    for (const std::string& n : s.ratio_names) {
      const auto t = simlab::theory_value(n, s.family, theory[i], z.p);
      z.ratios.push_back({t.value_or(1.0), 0.01});
    }
    s.rows.push_back(z);
  }
  simlab::ComparisonReport r = simlab::compare_to_theory(s, theory);
  CHECK(r.pass);
  CHECK(r.max_abs_z < 1e-12);
  // lambda_ratio has no theory column.
  CHECK(r.rows[0].entries.size() == 2 + s.ratio_names.size() - 1);

  s.rows[1].ratios[0].mean += 0.04;  // sigma_ratio off by 4 SE
  r = simlab::compare_to_theory(s, theory);
  CHECK_FALSE(r.pass);
  CHECK(r.max_abs_z == doctest::Approx(4.0).epsilon(1e-9));
  std::ostringstream os;
  simlab::write_comparison_csv(os, r);
  CHECK(os.str().find("z_sigma_ratio") != std::string::npos);
  CHECK(os.str().find(",0\n") != std::string::npos);

  s.rows[1].p = 31;
  CHECK_THROWS_AS(simlab::compare_to_theory(s, theory), DomainError);
  s.rows[1].p = 30;
  s.family = models::Family::LogLogisticAFT;
  CHECK_THROWS_AS(simlab::compare_to_theory(s, theory), DomainError);
}

TEST_CASE("zeta -> 0 row matches the classical limit") {
  simlab::SimulationPlan p = weibull_plan();
  p.N = 2000;
  p.zeta_grid = {0.004};
  p.replicates = simlab::Fixed{60};
  const simlab::SimulationSummary s = simlab::run_plan(p, 2);
  const simlab::ComparisonReport r = simlab::compare_to_theory(s, p.nuisance0);
  CHECK(r.rows[0].entries[0].theory == doctest::Approx(1.0));
  CHECK(r.rows[0].entries[1].theory < 0.06);
  CHECK(r.pass);
}

TEST_CASE("corrected columns remove the Weibull bias") {
  simlab::SimulationPlan p = weibull_plan();
  p.N = 400;
  p.zeta_grid = {0.3};
  p.replicates = simlab::Fixed{100};
  const correction::CorrectionTable table =
      correction::build_correction_table(models::Family::WeibullPH, {0.1, 0.2, 0.25, 0.3, 0.35, 0.4});
  const simlab::SimulationSummary s = simlab::run_plan(p, 2, &table);
  CHECK(s.ratio_names.size() == 9);
  const simlab::ComparisonReport r = simlab::compare_to_theory(s, p.nuisance0);
  for (const simlab::ComparisonEntry& e : r.rows[0].entries) {
    INFO(e.name << " sim " << e.sim << " theory " << e.theory << " z " << e.z);
    CHECK(std::abs(e.z) < 4.0);
  }
  const auto ks = std::find(s.ratio_names.begin(), s.ratio_names.end(), "kappa_native_corrected");
  REQUIRE(ks != s.ratio_names.end());

  p.family = models::Family::ExpGammaFrailty;
  CHECK_THROWS_AS(simlab::run_plan(p, 1, &table), ConfigError);
  p.family = models::Family::WeibullPH;
  p.zeta_grid = {0.45};
  CHECK_THROWS_AS(simlab::run_plan(p, 1, &table), ConfigError);
}
