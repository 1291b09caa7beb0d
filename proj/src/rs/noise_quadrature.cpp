#include <cmath>

#include "overfit/error.hpp"
#include "overfit/numerics/quadrature.hpp"
#include "overfit/rs/noise_rule.hpp"

namespace overfit::rs {

using numerics::RuleKind;

NoiseRule exponential_rule(int order) {
  const numerics::QuadratureRule lag = numerics::gauss_rule(RuleKind::Laguerre, order);
  NoiseRule out;
  out.nodes.reserve(2 * lag.nodes.size());
  out.weights.reserve(2 * lag.nodes.size());
  for (std::size_t i = 0; i < lag.nodes.size(); ++i) {
    const double e = std::exp(-lag.nodes[i]);
    if (e == 0.0) continue;  // beyond double range; its weight is zero as well
    out.nodes.push_back(e);
    out.weights.push_back(lag.weights[i] * std::exp(-e));
  }
  const double tail = std::exp(-1.0);
  for (std::size_t i = 0; i < lag.nodes.size(); ++i) {
    out.nodes.push_back(1.0 + lag.nodes[i]);
    out.weights.push_back(lag.weights[i] * tail);
  }
  return out;
}

double frailty_residual_from_exp(double e, double theta) {
  if (!(e > 0.0)) throw DomainError("frailty_residual_from_exp: E must be positive");
  if (theta < 0.0) throw DomainError("frailty_residual_from_exp: theta must be non-negative");
  const double y = theta * e;
  // log((e^y - 1) / theta) = log E + log((e^y - 1) / y)
  double excess;
  if (y < 1e-8) {
    excess = 0.5 * y;
  } else if (y < 30.0) {
    excess = std::log(std::expm1(y) / y);
  } else {
    excess = y + std::log1p(-std::exp(-y)) - std::log(y);
  }
  return -(std::log(e) + excess);
}

NoiseRule noise_rule(models::Noise noise, int order, double theta) {
  switch (noise) {
    case models::Noise::Gumbel: {
      NoiseRule r = exponential_rule(order);
      for (double& x : r.nodes) x = -std::log(x);
      return r;
    }
    case models::Noise::GammaFrailty: {
      NoiseRule r = exponential_rule(order);
      for (double& x : r.nodes) x = frailty_residual_from_exp(x, theta);
      return r;
    }
    case models::Noise::Logistic: {
      // Logistic density e^{-|z|} / (1 + e^{-|z|})^2 is even: fold onto z >= 0.
      const numerics::QuadratureRule lag = numerics::gauss_rule(RuleKind::Laguerre, order);
      NoiseRule r;
      for (std::size_t i = 0; i < lag.nodes.size(); ++i) {
        const double f = lag.nodes[i];
        const double q = 1.0 + std::exp(-f);
        const double w = lag.weights[i] / (q * q);
        r.nodes.push_back(f);
        r.weights.push_back(w);
        r.nodes.push_back(-f);
        r.weights.push_back(w);
      }
      return r;
    }
    case models::Noise::Gaussian: {
      const numerics::QuadratureRule h = numerics::gauss_rule(RuleKind::Hermite, order);
      return {h.nodes, h.weights};
    }
  }
  throw DomainError("noise_rule: unknown noise");
}

}  // namespace overfit::rs
