#pragma once

#include <vector>

#include "overfit/models/noise.hpp"

namespace overfit::rs {

/// Discrete approximation of the law of the standardised noise Z (phi = 0,
/// sigma = 1), with E[g(Z)] ~ sum_i weights[i] * g(nodes[i]).
struct NoiseRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  template <class F>
  double integrate(F&& g) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * g(nodes[i]);
    return acc;
  }
  std::size_t size() const { return nodes.size(); }
};

/// Rule for E ~ Exp(1) that stays accurate for integrands with log E
/// singularities. The half-line is split at E = 1: on (0, 1) the substitution
/// E = e^{-s} turns e^{-E} dE into e^{-s} e^{-e^{-s}} ds, on (1, inf) the
/// shift E = 1 + x gives e^{-1} e^{-x} dx, and both pieces use an
/// order-point Gauss-Laguerre rule. Returns 2 * order nodes, less any
/// whose E underflows.
NoiseRule exponential_rule(int order);

/// Rule for the noise of the log-linear model. Gumbel and frailty noise are
/// functions of an Exp(1) variable and use exponential_rule; the logistic
/// law is folded onto Laguerre nodes; Gaussian noise uses Gauss-Hermite.
/// theta is the frailty variance and is ignored for the other laws.
NoiseRule noise_rule(models::Noise noise, int order, double theta = 0.0);

/// Standardised frailty residual as a function of E ~ Exp(1):
/// z = -log((e^{theta E} - 1) / theta), with the theta = 0 limit -log E.
double frailty_residual_from_exp(double e, double theta);

}  // namespace overfit::rs
