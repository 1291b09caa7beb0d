#include "overfit/numerics/scalar_solvers.hpp"

#include <algorithm>

namespace overfit::numerics {

double solve_a_minus_b_tanh(double a, double b) {
  if (!(b >= 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw DomainError("solve_a_minus_b_tanh: need finite a and b >= 0");
  if (b == 0.0) return a;
  if (a == 0.0) return 0.0;

  // g(x) = x - a + b tanh(x) is strictly increasing; its root lies in [a-b, a+b]
  // and shares the sign of a.
  double lo = a > 0 ? std::max(0.0, a - b) : a - b;
  double hi = a > 0 ? a + b : std::min(0.0, a + b);
  // Start from the better of the linearised and the saturated solution.
  auto resid = [&](double x) { return x - a + b * std::tanh(x); };
  const double x_lin = std::clamp(a / (1.0 + b), lo, hi);
  const double x_sat = std::clamp(a > 0 ? a - b : a + b, lo, hi);
  double x = std::abs(resid(x_sat)) < std::abs(resid(x_lin)) ? x_sat : x_lin;
  for (int it = 0; it < 200; ++it) {
    const double t = std::tanh(x);
    const double g = x - a + b * t;
    if (g == 0.0) return x;
    (g > 0 ? hi : lo) = x;
    const double dg = 1.0 + b * (1.0 - t) * (1.0 + t);
    double next = x - g / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 2e-16 * (1.0 + std::abs(x)) || hi - lo <= 2e-16 * (1.0 + std::abs(x))) return next;
    x = next;
  }
  return x;
}

}  // namespace overfit::numerics
