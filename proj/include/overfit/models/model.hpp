#pragma once

#include <Eigen/Core>
#include <string>
#include <string_view>

namespace overfit::models {

enum class Family { WeibullPH, LogLogisticAFT, ExpGammaFrailty };

std::string_view to_string(Family f);
/// Accepts "weibull", "loglogistic", "frailty" and the long tags returned by to_string.
Family family_from_string(std::string_view s);

/// Native nuisance parameters. Weibull and Log-Logistic use (lambda, rho);
/// the Gamma-frailty model uses (lambda, theta) where theta is the frailty variance.
struct Nuisance {
  double lambda = 1.0;
  double rho = 1.0;
  double theta = 0.0;
};

struct ModelSpec {
  Family family = Family::WeibullPH;
  Eigen::VectorXd beta;
  Nuisance nuisance;

  double signal_strength_sq() const { return beta.squaredNorm(); }
};

/// Throws DomainError when positivity constraints fail or beta is not finite.
void validate(Family family, const Nuisance& nu);
void validate(const ModelSpec& spec);

/// Parameters of the log-linear form Y = -log T = X' varphi + Z. For the
/// frailty model sigma is fixed at 1 and theta carries the noise shape.
struct LogLinearForm {
  Eigen::VectorXd varphi;
  double phi = 0.0;
  double sigma = 1.0;
  double theta = 0.0;
};

LogLinearForm to_log_linear(const ModelSpec& spec);
ModelSpec from_log_linear(Family family, const LogLinearForm& form);

/// Conditional density of T given the linear predictor lp = X'beta.
double log_density(Family family, double t, double lp, const Nuisance& nu);
double density(Family family, double t, double lp, const Nuisance& nu);
double dlogdensity_dlinpred(Family family, double t, double lp, const Nuisance& nu);

/// Partial derivatives of log p(t | lp) with respect to the native nuisance
/// parameters; the entry not used by the family is zero.
struct NuisanceGradient {
  double d_lambda = 0.0;
  double d_rho = 0.0;
  double d_theta = 0.0;
};
NuisanceGradient dlogdensity_dnuisance(Family family, double t, double lp, const Nuisance& nu);

}  // namespace overfit::models
