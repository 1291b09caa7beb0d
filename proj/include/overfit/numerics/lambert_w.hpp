#pragma once

namespace overfit::numerics {

/// Principal branch W0 of the Lambert W function, w * exp(w) = x, w >= -1.
/// Throws DomainError for x < -1/e.
double lambert_w0(double x);

/// W0(exp(log_x)) without forming exp(log_x); stays finite for log_x well
/// beyond the double overflow threshold.
double lambert_w0_exp(double log_x);

}  // namespace overfit::numerics
