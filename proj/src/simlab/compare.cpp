#include <cmath>
#include <fstream>
#include <limits>

#include "overfit/error.hpp"
#include "overfit/models/io.hpp"
#include "overfit/simlab/simlab.hpp"

namespace overfit::simlab {

namespace {

models::LogLinearForm truth_form(models::Family family, const models::Nuisance& nu) {
  models::ModelSpec spec;
  spec.family = family;
  spec.nuisance = nu;
  spec.beta = Eigen::VectorXd::Zero(1);
  return models::to_log_linear(spec);
}

}  // namespace

double c4(int p) {
  if (p < 2) throw DomainError("c4: need p >= 2");
  const double k = p - 1.0;
  return std::sqrt(2.0 / k) * std::exp(std::lgamma(0.5 * (k + 1.0)) - std::lgamma(0.5 * k));
}

std::vector<rs::RSSolution> theory_solutions(models::Family family, const std::vector<double>& zeta_grid,
                                             const models::Nuisance& nuisance0, const rs::RsConfig& cfg) {
  models::validate(family, nuisance0);
  const models::LogLinearForm t = truth_form(family, nuisance0);
  std::vector<rs::RSSolution> out;
  out.reserve(zeta_grid.size());
  const rs::RSSolution* warm = nullptr;
  for (std::size_t i = 0; i < zeta_grid.size(); ++i) {
    if (i > 0 && !(zeta_grid[i] > zeta_grid[i - 1]))
      throw DomainError("theory_solutions: zeta grid must be strictly increasing");
    const models::NoiseParams truth{t.phi, t.sigma, t.theta};
    switch (family) {
      case models::Family::WeibullPH: out.push_back(rs::solve_rs_weibull(zeta_grid[i], cfg, truth, warm)); break;
      case models::Family::LogLogisticAFT:
        out.push_back(rs::solve_rs_loglogistic(zeta_grid[i], cfg, truth, warm));
        break;
      case models::Family::ExpGammaFrailty:
        out.push_back(rs::solve_rs_frailty(zeta_grid[i], t.theta, cfg, t.phi, warm));
        break;
    }
    if (out.back().converged) warm = &out.back();
  }
  return out;
}

std::optional<double> theory_value(const std::string& column, models::Family family, const rs::RSSolution& sol,
                                   int p) {
  if (column == "kappa") return sol.w_over_S();
  if (column == "delta") return c4(p) * sol.v_star / std::sqrt(static_cast<double>(p));
  if (column == "sigma_ratio") return sol.f();
  if (column == "phi_shift") return sol.g();
  if (column == "rho_ratio") return 1.0 / sol.f();
  if (column == "theta") return sol.nuisance_star.theta;
  if (column == "kappa_native")
    return family == models::Family::WeibullPH ? sol.w_over_S() / sol.f() : sol.w_over_S();
  if (column == "sigma_corrected_ratio" || column == "rho_corrected_ratio" || column == "kappa_native_corrected")
    return 1.0;
  if (column == "phi_corrected_shift") return 0.0;
  return std::nullopt;
}

ComparisonReport compare_to_theory(const SimulationSummary& summary, const std::vector<rs::RSSolution>& theory,
                                   double z_limit) {
  if (theory.size() != summary.rows.size())
    throw DomainError("compare_to_theory: need one theory point per summary row");
  ComparisonReport rep;
  rep.family = summary.family;
  rep.z_limit = z_limit;
  for (std::size_t i = 0; i < summary.rows.size(); ++i) {
    const ZetaSummary& z = summary.rows[i];
    const rs::RSSolution& sol = theory[i];
    if (sol.noise != models::noise_of(summary.family))
      throw DomainError("compare_to_theory: theory is for another family");
    const double zeta = static_cast<double>(z.p) / z.N;
    if (std::abs(sol.zeta - zeta) > 1e-9)
      throw DomainError("compare_to_theory: theory point at zeta " + models::format_double(sol.zeta) +
                        " does not match p/N = " + models::format_double(zeta));
    if (!sol.converged)
      throw ConvergenceError("compare_to_theory: RS solution at zeta " + models::format_double(sol.zeta) +
                             " did not converge");

    ComparisonRow row;
    row.zeta = z.zeta;
    row.p = z.p;
    auto add = [&](const std::string& name, const Stat& s) {
      const std::optional<double> th = theory_value(name, summary.family, sol, z.p);
      if (!th) return;
      ComparisonEntry e{name, s.mean, s.se, *th, 0.0};
      const double diff = s.mean - *th;
      if (s.se > 0.0) e.z = diff / s.se;
      else e.z = diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      if (!(std::abs(e.z) <= z_limit)) rep.pass = false;
      if (std::isnan(e.z) || std::abs(e.z) > rep.max_abs_z)
        rep.max_abs_z = std::isnan(e.z) ? std::numeric_limits<double>::infinity() : std::abs(e.z);
      row.entries.push_back(e);
    };
    add("kappa", z.kappa);
    add("delta", z.delta);
    for (std::size_t k = 0; k < summary.ratio_names.size(); ++k) add(summary.ratio_names[k], z.ratios.at(k));
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

ComparisonReport compare_to_theory(const SimulationSummary& summary, const models::Nuisance& nuisance0,
                                   const rs::RsConfig& cfg, double z_limit) {
  std::vector<double> grid;
  for (const ZetaSummary& z : summary.rows) grid.push_back(static_cast<double>(z.p) / z.N);
  return compare_to_theory(summary, theory_solutions(summary.family, grid, nuisance0, cfg), z_limit);
}

void write_comparison_csv(std::ostream& out, const ComparisonReport& r) {
  using models::format_double;
  out << "family,zeta,p";
  if (!r.rows.empty())
    for (const ComparisonEntry& e : r.rows.front().entries)
      out << ',' << e.name << ',' << e.name << "_se," << e.name << "_theory,z_" << e.name;
  out << ",pass\n";
  const std::string fam(models::to_string(r.family));
  for (const ComparisonRow& row : r.rows) {
    out << fam << ',' << format_double(row.zeta) << ',' << row.p;
    bool pass = true;
    for (const ComparisonEntry& e : row.entries) {
      out << ',' << format_double(e.sim) << ',' << format_double(e.se) << ',' << format_double(e.theory) << ','
          << format_double(e.z);
      if (!(std::abs(e.z) <= r.z_limit)) pass = false;
    }
    out << ',' << (pass ? 1 : 0) << '\n';
  }
}

void write_comparison_csv(const std::string& path, const ComparisonReport& r) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "' for writing");
  write_comparison_csv(f, r);
  if (!f) throw ConfigError("failed writing " + path);
}

}  // namespace overfit::simlab
