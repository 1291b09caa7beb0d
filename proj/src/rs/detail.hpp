#pragma once

#include <Eigen/Core>
#include <functional>

#include "overfit/numerics/quadrature.hpp"
#include "overfit/rs/noise_rule.hpp"
#include "overfit/rs/rs.hpp"

namespace overfit::rs::detail {

/// Residual of a system that is parameterised by zeta.
using ZetaResidual = std::function<Eigen::VectorXd(double zeta, const Eigen::VectorXd& x)>;

struct PathResult {
  Eigen::VectorXd x;
  double zeta_reached = 0.0;  // last zeta at which x solved the system
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Newton continuation from a solution (or good guess) at zeta_from to
/// zeta_to. Starts with cfg.fp.continuation_steps equal stages, halves a
/// stage that fails, and predicts each stage by secant extrapolation.
/// When a stage fails and give_up(zeta, x) at the last solved point is true
/// the path stops early.
PathResult follow_path(const ZetaResidual& F, double zeta_from, Eigen::VectorXd x_from, double zeta_to,
                       const RsConfig& cfg, const std::function<bool(double, const Eigen::VectorXd&)>& give_up = {});

/// Zeta from which a cold start begins; the asymptotic guess is accurate there.
double cold_start_zeta(double zeta);

/// E[rho''(Z)] of the standardised noise, i.e. the Fisher information for location.
double location_information(models::Noise noise, const NoiseRule& rule, double theta = 0.0);

void check_zeta(double zeta, const char* who);

/// Absolute order parameters of a location-scale solution from its rescaled form.
RSSolution assemble_location_scale(double zeta, const Rescaled& r, const models::NoiseParams& truth,
                                   models::Noise noise);

Eigen::VectorXd weibull_residuals(double zeta, const Rescaled& r, const RsConfig& cfg);
Eigen::VectorXd loglogistic_residuals(double zeta, const Rescaled& r, const RsConfig& cfg);
/// Interior frailty system, or the three-equation boundary system when r.d == 0.
Eigen::VectorXd frailty_residuals(double zeta, const Rescaled& r, const RsConfig& cfg, double theta0);

/// Rule for E[g(Y)] with Y = b Q + s Z, Q ~ N(0,1) independent of the noise Z.
/// wz carries E[Z; Y near y], so that sum wz g(y) approximates E[Z g(Y)].
struct LineRule {
  std::vector<double> y, w, wz;
  std::size_t size() const { return w.size(); }
};

/// Builds line rules for varying (b, s). Small b uses the tensor rule
/// directly, with a Hermite order that halves each time b does (from
/// hermite_order/2 at b = 1, never below 8); large b, where g(bQ + t) is too
/// rough in Q for Gauss-Hermite, uses a trapezoid rule in y against the
/// density of Y, which is a Gaussian kernel average over the noise rule.
class LineQuadrature {
 public:
  LineQuadrature(int hermite_order, NoiseRule noise);
  LineRule operator()(double b, double s) const;
  const NoiseRule& noise() const { return noise_; }

  static constexpr double kSwitchScale = 1.0;

 private:
  std::vector<numerics::QuadratureRule> ladder_;  // Hermite rules for b <= 1, 1/2, 1/4, ...
  NoiseRule noise_;
  double step_;
  std::vector<std::size_t> live_;  // noise nodes with non-negligible weight
};

}  // namespace overfit::rs::detail
