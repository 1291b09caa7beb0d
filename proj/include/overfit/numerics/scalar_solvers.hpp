#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "overfit/error.hpp"

namespace overfit::numerics {

/// Unique root of x = a - b tanh(x) for b >= 0. Safeguarded Newton inside
/// the bracket [a - b, a + b].
double solve_a_minus_b_tanh(double a, double b);

/// Value and first two derivatives of a scalar function at one point.
struct Jet {
  double value;
  double d1;
  double d2;
};

/// Root of a continuous function on [lo, hi] with a sign change (TOMS 748).
/// Throws DomainError if the endpoints do not bracket a root.
template <class F>
double bracketed_root(F&& f, double lo, double hi, double xtol = 1e-14, int max_iter = 200);

/// argmin_xi { 0.5 ((xi - nu) / u)^2 + h(xi) } for convex, twice
/// differentiable h; `neg_logdensity(xi)` returns Jet{h, h', h''}.
/// Newton on the stationarity condition, safeguarded by a bracket that is
/// grown geometrically from nu. First-order residual is driven below 1e-10
/// relative to the scale of the problem.
template <class H>
double prox_minimize(double nu, double u, H&& neg_logdensity);

/// Derivative of the prox point with respect to nu, d xi / d nu = 1 / (1 + u^2 h''(xi)).
template <class H>
double prox_derivative(double xi, double u, H&& neg_logdensity) {
  return 1.0 / (1.0 + u * u * neg_logdensity(xi).d2);
}

}  // namespace overfit::numerics

#include "overfit/numerics/scalar_solvers_impl.hpp"
