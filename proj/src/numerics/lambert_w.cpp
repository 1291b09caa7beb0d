#include "overfit/numerics/lambert_w.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <numbers>

#include "overfit/error.hpp"

namespace overfit::numerics {
namespace {

constexpr double kInvE = 0.36787944117144232159552377016146;

double initial_guess(double x) {
  if (x < -0.32) {
    // Series around the branch point in p = sqrt(2(e x + 1)).
    const double p = std::sqrt(std::max(0.0, 2.0 * (std::numbers::e * x + 1.0)));
    return -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * 11.0 / 72.0));
  }
  if (std::abs(x) < 0.25) return x * (1.0 + x * (-1.0 + x * 1.5));
  if (x < 3.0) return std::log1p(x) * (1.0 - std::log1p(std::log1p(x)) / (2.0 + std::log1p(x)));
  const double l1 = std::log(x);
  const double l2 = std::log(l1);
  return l1 - l2 + l2 / l1;
}

}  // namespace

double lambert_w0(double x) {
  if (std::isnan(x)) throw DomainError("lambert_w0: NaN argument");
  if (x < -kInvE) {
    // Tolerate the rounding of -1/e itself.
    if (x > -kInvE - 4e-17) return -1.0;
    throw DomainError("lambert_w0: argument below -1/e");
  }
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return x;

  double w = initial_guess(x);
  for (int it = 0; it < 64; ++it) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double wp1 = w + 1.0;
    if (wp1 == 0.0) break;
    // Halley step.
    const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
    const double step = f / denom;
    w -= step;
    if (w < -1.0) w = -1.0;
    if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(w))) break;
  }
  return w;
}

double lambert_w0_exp(double log_x) {
  if (std::isnan(log_x)) throw DomainError("lambert_w0_exp: NaN argument");
  if (log_x < 20.0) return lambert_w0(std::exp(log_x));
  // Solve w + log(w) = log_x by Newton; convex and monotone for w > 0.
  double w = log_x - std::log(log_x);
  for (int it = 0; it < 50; ++it) {
    const double f = w + std::log(w) - log_x;
    const double step = f / (1.0 + 1.0 / w);
    w -= step;
    if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * w) break;
  }
  return w;
}

}  // namespace overfit::numerics
