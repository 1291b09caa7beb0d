#include "overfit/models/model.hpp"

#include <cmath>

#include "overfit/error.hpp"
#include "overfit/models/noise.hpp"

namespace overfit::models {

std::string_view to_string(Family f) {
  switch (f) {
    case Family::WeibullPH: return "weibull_ph";
    case Family::LogLogisticAFT: return "loglogistic_aft";
    case Family::ExpGammaFrailty: return "exp_gamma_frailty";
  }
  return "unknown";
}

Family family_from_string(std::string_view s) {
  if (s == "weibull" || s == "weibull_ph") return Family::WeibullPH;
  if (s == "loglogistic" || s == "loglogistic_aft" || s == "log-logistic") return Family::LogLogisticAFT;
  if (s == "frailty" || s == "exp_gamma_frailty") return Family::ExpGammaFrailty;
  throw ConfigError("unknown family '" + std::string(s) + "'");
}

void validate(Family family, const Nuisance& nu) {
  if (!(nu.lambda > 0.0) || !std::isfinite(nu.lambda)) throw DomainError("lambda must be positive");
  if (family == Family::ExpGammaFrailty) {
    if (!(nu.theta >= 0.0) || !std::isfinite(nu.theta)) throw DomainError("theta must be non-negative");
  } else if (!(nu.rho > 0.0) || !std::isfinite(nu.rho)) {
    throw DomainError("rho must be positive");
  }
}

void validate(const ModelSpec& spec) {
  validate(spec.family, spec.nuisance);
  if (!spec.beta.allFinite()) throw DomainError("beta must be finite");
}

LogLinearForm to_log_linear(const ModelSpec& spec) {
  validate(spec);
  LogLinearForm f;
  const Nuisance& nu = spec.nuisance;
  switch (spec.family) {
    case Family::WeibullPH:
      f.phi = std::log(nu.lambda);
      f.sigma = 1.0 / nu.rho;
      f.varphi = spec.beta * f.sigma;
      break;
    case Family::LogLogisticAFT:
      f.phi = -std::log(nu.lambda);
      f.sigma = 1.0 / nu.rho;
      f.varphi = spec.beta;
      break;
    case Family::ExpGammaFrailty:
      f.phi = std::log(nu.lambda);
      f.sigma = 1.0;
      f.theta = nu.theta;
      f.varphi = spec.beta;
      break;
  }
  return f;
}

ModelSpec from_log_linear(Family family, const LogLinearForm& form) {
  ModelSpec spec;
  spec.family = family;
  switch (family) {
    case Family::WeibullPH:
      if (!(form.sigma > 0.0)) throw DomainError("sigma must be positive");
      spec.nuisance.lambda = std::exp(form.phi);
      spec.nuisance.rho = 1.0 / form.sigma;
      spec.beta = form.varphi / form.sigma;
      break;
    case Family::LogLogisticAFT:
      if (!(form.sigma > 0.0)) throw DomainError("sigma must be positive");
      spec.nuisance.lambda = std::exp(-form.phi);
      spec.nuisance.rho = 1.0 / form.sigma;
      spec.beta = form.varphi;
      break;
    case Family::ExpGammaFrailty:
      spec.nuisance.lambda = std::exp(form.phi);
      spec.nuisance.theta = form.theta;
      spec.beta = form.varphi;
      break;
  }
  validate(spec);
  return spec;
}

namespace {

void check_point(Family family, double t, const Nuisance& nu) {
  if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("density: t must be positive");
  validate(family, nu);
}

double softplus(double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

}  // namespace

double log_density(Family family, double t, double lp, const Nuisance& nu) {
  check_point(family, t, nu);
  switch (family) {
    case Family::WeibullPH: {
      const double log_lt = std::log(nu.lambda * t);
      const double a = std::exp(nu.rho * log_lt + lp);
      return std::log(nu.rho) + nu.rho * std::log(nu.lambda) + (nu.rho - 1.0) * std::log(t) + lp - a;
    }
    case Family::LogLogisticAFT: {
      const double v = nu.rho * (std::log(t) + lp - std::log(nu.lambda));
      return std::log(nu.rho) - std::log(t) + v - 2.0 * softplus(v);
    }
    case Family::ExpGammaFrailty: {
      const double r = -(std::log(nu.lambda * t) + lp);
      return -std::log(t) - frailty_terms(r, nu.theta).h;
    }
  }
  throw DomainError("log_density: unknown family");
}

double density(Family family, double t, double lp, const Nuisance& nu) {
  return std::exp(log_density(family, t, lp, nu));
}

double dlogdensity_dlinpred(Family family, double t, double lp, const Nuisance& nu) {
  check_point(family, t, nu);
  switch (family) {
    case Family::WeibullPH:
      return 1.0 - std::exp(nu.rho * std::log(nu.lambda * t) + lp);
    case Family::LogLogisticAFT: {
      const double v = nu.rho * (std::log(t) + lp - std::log(nu.lambda));
      return -nu.rho * std::tanh(0.5 * v);
    }
    case Family::ExpGammaFrailty: {
      const double r = -(std::log(nu.lambda * t) + lp);
      return frailty_terms(r, nu.theta).h_r;
    }
  }
  throw DomainError("dlogdensity_dlinpred: unknown family");
}

NuisanceGradient dlogdensity_dnuisance(Family family, double t, double lp, const Nuisance& nu) {
  check_point(family, t, nu);
  NuisanceGradient g;
  switch (family) {
    case Family::WeibullPH: {
      const double log_lt = std::log(nu.lambda * t);
      const double one_minus_a = 1.0 - std::exp(nu.rho * log_lt + lp);
      g.d_lambda = nu.rho * one_minus_a / nu.lambda;
      g.d_rho = 1.0 / nu.rho + log_lt * one_minus_a;
      break;
    }
    case Family::LogLogisticAFT: {
      const double log_u = std::log(t) + lp - std::log(nu.lambda);
      const double th = std::tanh(0.5 * nu.rho * log_u);
      g.d_lambda = nu.rho * th / nu.lambda;
      g.d_rho = 1.0 / nu.rho - log_u * th;
      break;
    }
    case Family::ExpGammaFrailty: {
      const double r = -(std::log(nu.lambda * t) + lp);
      const FrailtyTerms f = frailty_terms(r, nu.theta);
      g.d_lambda = f.h_r / nu.lambda;
      g.d_theta = -f.h_t;
      break;
    }
  }
  return g;
}

}  // namespace overfit::models
