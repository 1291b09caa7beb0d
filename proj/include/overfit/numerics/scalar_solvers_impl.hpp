#pragma once

#include <boost/math/tools/toms748_solve.hpp>
#include <algorithm>
#include <cstdint>

namespace overfit::numerics {

template <class F>
double bracketed_root(F&& f, double lo, double hi, double xtol, int max_iter) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (std::isnan(flo) || std::isnan(fhi)) throw NumericalError("bracketed_root: NaN at bracket end");
  if ((flo > 0) == (fhi > 0)) throw DomainError("bracketed_root: endpoints do not bracket a root");
  std::uintmax_t iters = static_cast<std::uintmax_t>(max_iter);
  auto tol = [xtol](double a, double b) { return std::abs(b - a) <= xtol * (1.0 + std::abs(a)); };
  auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
  return 0.5 * (r.first + r.second);
}

template <class H>
double prox_minimize(double nu, double u, H&& neg_logdensity) {
  if (!(u > 0.0)) throw DomainError("prox_minimize: u must be positive");
  const double inv_u2 = 1.0 / (u * u);
  auto grad = [&](double xi, Jet& j) {
    j = neg_logdensity(xi);
    return (xi - nu) * inv_u2 + j.d1;
  };

  Jet j{};
  double x = nu;
  double g = grad(x, j);
  if (g == 0.0) return x;
  if (!std::isfinite(g)) throw NumericalError("prox_minimize: non-finite gradient at nu");

  // Bracket [lo, hi] with g(lo) < 0 < g(hi); g is strictly increasing.
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  (g > 0 ? hi : lo) = x;

  const double scale = 1.0 + std::abs(nu);
  bool slow = false;  // last step cut |g| by less than a factor of 10
  double last_step = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double curv = inv_u2 + j.d2;
    const bool bounded = std::isfinite(lo) && std::isfinite(hi);
    double next = x - g / curv;
    const bool newton_ok = std::isfinite(next) && next > lo && next < hi;
    if (bounded) {
      if (!newton_ok || slow) next = 0.5 * (lo + hi);
    } else if (!newton_ok || slow) {
      // Expand toward the open side with geometrically growing steps.
      const double span = std::max({1.0, std::abs(g) / curv, 2.0 * std::abs(last_step)});
      next = std::isfinite(lo) ? lo + span : hi - span;
    }
    const double g_old = g;
    last_step = next - x;
    x = next;
    g = grad(x, j);
    if (!std::isfinite(g)) {
      // Overshot into overflow; that side becomes the bracket end.
      (last_step > 0 ? hi : lo) = x;
      x = std::isfinite(lo) && std::isfinite(hi) ? 0.5 * (lo + hi) : x - 0.5 * last_step;
      g = grad(x, j);
      slow = true;
      if (!std::isfinite(g)) continue;
    } else {
      slow = std::abs(g) > 0.1 * std::abs(g_old);
    }
    if (g == 0.0) return x;
    (g > 0 ? hi : lo) = x;
    const double curv_now = inv_u2 + j.d2;
    if (std::abs(g) / curv_now <= 1e-14 * scale || std::abs(g) * u * u <= 1e-13 * scale) {
      return x - g / curv_now;
    }
    if (std::isfinite(lo) && std::isfinite(hi) && hi - lo <= 4e-16 * (std::abs(lo) + std::abs(hi)))
      return x;
  }
  throw ConvergenceError("prox_minimize: no convergence (ill-posed density?)");
}

}  // namespace overfit::numerics
