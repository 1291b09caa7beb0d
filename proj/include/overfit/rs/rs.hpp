#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "overfit/models/model.hpp"
#include "overfit/models/noise.hpp"
#include "overfit/numerics/fixed_point.hpp"

namespace overfit::rs {

struct RsConfig {
  int hermite_order = 64;  // Gaussian averages over Q (and Z0 in the generic solver)
  int noise_order = 64;    // Laguerre order behind the noise rule
  int generic_order = 32;  // order on each of the three axes of the generic solver
  double tol = 1e-11;      // sup-norm of the scaled residual vector
  int max_newton = 15;     // Newton iterations per continuation stage
  numerics::FixedPointConfig fp;  // fallback iteration and continuation stages
  /// Hold the noise shape (sigma or theta) at this value instead of solving for it.
  std::optional<double> fixed_shape;

  /// Same configuration with both quadrature orders doubled.
  RsConfig doubled() const;
};

void validate(const RsConfig& cfg);

/// Dimensionless order parameters. Location-scale noise:
///   a = u/sigma*, b = v/sigma*, c = sigma*/sigma0, d = (phi* - phi0)/sigma*.
/// Frailty noise: a = u*, b = v*, c = phi* - phi0, d = theta*.
struct Rescaled {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
};

struct RSSolution {
  models::Noise noise = models::Noise::Gumbel;
  double zeta = 0.0;
  double S = 1.0;
  double w_star = 1.0;
  double v_star = 0.0;
  double u_star = 0.0;
  models::NoiseParams nuisance0;
  models::NoiseParams nuisance_star;
  Rescaled rescaled;
  double residual = 0.0;
  bool converged = false;
  bool boundary = false;  // frailty variance pinned at zero
  int iterations = 0;
  /// E[tanh x*] at the solution, for the Log-Logistic and frailty systems.
  std::optional<double> mean_tanh;

  double w_over_S() const { return w_star / S; }
  /// sigma*/sigma0 for location-scale noise, 1 for frailty.
  double f() const;
  /// (phi* - phi0)/sigma0 for location-scale noise, phi* - phi0 for frailty.
  double g() const;
};

/// Weibull system. Solutions in rescaled form do not depend on (phi0, sigma0);
/// `truth` only sets the absolute order parameters. `warm` continues from a
/// previously converged solution of the same system.
RSSolution solve_rs_weibull(double zeta, const RsConfig& cfg = {}, const models::NoiseParams& truth = {},
                            const RSSolution* warm = nullptr);

/// Log-Logistic system; the location shift d vanishes by symmetry of the noise.
RSSolution solve_rs_loglogistic(double zeta, const RsConfig& cfg = {}, const models::NoiseParams& truth = {},
                                const RSSolution* warm = nullptr);

/// Gamma-frailty system at true variance theta0. When the constrained optimum
/// has theta* = 0 the boundary system is solved and `boundary` is set.
RSSolution solve_rs_frailty(double zeta, double theta0, const RsConfig& cfg = {}, double phi0 = 0.0,
                            const RSSolution* warm = nullptr);

/// Damped fixed-point map of the Weibull system in (a, b, c, d):
/// a solves the slope equation E[W/(1+W)] = zeta at fixed (b, c, d), b from
/// the variance condition, c from the
/// sigma stationarity condition and d from the phi condition.
numerics::VectorMap weibull_fixed_point_map(double zeta, const RsConfig& cfg = {});

/// Scaled residuals of the specialised systems at a given rescaled point.
/// theta0 is used by the frailty system only.
Eigen::VectorXd rescaled_residuals(models::Noise noise, double zeta, const Rescaled& r, const RsConfig& cfg,
                                   double theta0 = 0.0);

/// Sup-norm of the residuals of a specialised solution re-evaluated at
/// doubled quadrature order.
double certify(const RSSolution& sol, const RsConfig& cfg = {});

/// Full system in (w, v, u, phi, shape) for Y = S Z0 + Z, with averages over
/// (Z0, Q, Z) by tensor quadrature and the prox point found numerically.
RSSolution solve_rs_generic(double zeta, double S, models::Noise noise, const models::NoiseParams& nuisance0,
                            const RsConfig& cfg = {}, const RSSolution* warm = nullptr);

/// Reduced system of a linear model in (v, u, phi, shape), with w* = S.
RSSolution solve_rs_linear(double zeta, models::Noise noise, const models::NoiseParams& nuisance0,
                           const RsConfig& cfg = {}, double S = 1.0, const RSSolution* warm = nullptr);

/// Specialised solver of a family at each point of an increasing grid, each
/// solve warm-started from the previous point.
std::vector<RSSolution> solve_rs_sweep(models::Family family, const std::vector<double>& zeta_grid,
                                       const RsConfig& cfg = {}, double theta0 = 0.0);

struct ScatterTheory {
  double kappa = 1.0;
  double delta = 0.0;
};
/// kappa = w*/S and delta = v*/sqrt(p).
ScatterTheory rs_to_scatter_stats(const RSSolution& sol, double S, int p);

void write_solutions_csv(std::ostream& os, const std::vector<RSSolution>& sols);
void write_solutions_csv(const std::string& path, const std::vector<RSSolution>& sols);

}  // namespace overfit::rs
