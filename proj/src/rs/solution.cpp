#include <cmath>
#include <fstream>
#include <ostream>

#include "detail.hpp"
#include "overfit/error.hpp"
#include "overfit/models/io.hpp"

namespace overfit::rs {

double RSSolution::f() const {
  return models::has_scale(noise) ? nuisance_star.sigma / nuisance0.sigma : 1.0;
}

double RSSolution::g() const {
  const double shift = nuisance_star.phi - nuisance0.phi;
  return models::has_scale(noise) ? shift / nuisance0.sigma : shift;
}

Eigen::VectorXd rescaled_residuals(models::Noise noise, double zeta, const Rescaled& r, const RsConfig& cfg,
                                   double theta0) {
  detail::check_zeta(zeta, "rescaled_residuals");
  switch (noise) {
    case models::Noise::Gumbel: return detail::weibull_residuals(zeta, r, cfg);
    case models::Noise::Logistic: return detail::loglogistic_residuals(zeta, r, cfg);
    case models::Noise::GammaFrailty: return detail::frailty_residuals(zeta, r, cfg, theta0);
    case models::Noise::Gaussian: break;
  }
  throw DomainError("rescaled_residuals: no specialised system for Gaussian noise");
}

double certify(const RSSolution& sol, const RsConfig& cfg) {
  return rescaled_residuals(sol.noise, sol.zeta, sol.rescaled, cfg.doubled(), sol.nuisance0.theta)
      .lpNorm<Eigen::Infinity>();
}

std::vector<RSSolution> solve_rs_sweep(models::Family family, const std::vector<double>& zeta_grid,
                                       const RsConfig& cfg, double theta0) {
  for (std::size_t i = 0; i < zeta_grid.size(); ++i) {
    detail::check_zeta(zeta_grid[i], "solve_rs_sweep");
    if (i > 0 && !(zeta_grid[i] > zeta_grid[i - 1]))
      throw DomainError("solve_rs_sweep: zeta grid must be strictly increasing");
  }
  std::vector<RSSolution> out;
  out.reserve(zeta_grid.size());
  const RSSolution* warm = nullptr;
  for (double zeta : zeta_grid) {
    switch (family) {
      case models::Family::WeibullPH: out.push_back(solve_rs_weibull(zeta, cfg, {}, warm)); break;
      case models::Family::LogLogisticAFT: out.push_back(solve_rs_loglogistic(zeta, cfg, {}, warm)); break;
      case models::Family::ExpGammaFrailty: out.push_back(solve_rs_frailty(zeta, theta0, cfg, 0.0, warm)); break;
    }
    if (out.back().converged) warm = &out.back();
  }
  return out;
}

ScatterTheory rs_to_scatter_stats(const RSSolution& sol, double S, int p) {
  if (!(S > 0.0)) throw DomainError("rs_to_scatter_stats: S must be positive");
  if (p < 1) throw DomainError("rs_to_scatter_stats: p must be positive");
  // The solution's w* is expressed relative to its own S.
  return {sol.w_over_S(), sol.v_star / std::sqrt(static_cast<double>(p))};
}

void write_solutions_csv(std::ostream& os, const std::vector<RSSolution>& sols) {
  using models::format_double;
  os << "zeta,w_over_S,v,u,c,d,theta,phi_shift,residual,converged\n";
  for (const RSSolution& s : sols) {
    os << format_double(s.zeta) << ',' << format_double(s.w_over_S()) << ',' << format_double(s.v_star) << ','
       << format_double(s.u_star) << ',' << format_double(s.rescaled.c) << ',' << format_double(s.rescaled.d) << ',';
    if (s.noise == models::Noise::GammaFrailty) os << format_double(s.nuisance_star.theta);
    os << ',' << format_double(s.nuisance_star.phi - s.nuisance0.phi) << ',' << format_double(s.residual) << ','
       << (s.converged ? 1 : 0) << '\n';
  }
}

void write_solutions_csv(const std::string& path, const std::vector<RSSolution>& sols) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open " + path + " for writing");
  write_solutions_csv(f, sols);
  if (!f) throw ConfigError("failed writing " + path);
}

}  // namespace overfit::rs
