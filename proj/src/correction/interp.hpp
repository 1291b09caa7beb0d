#pragma once

// pchip.hpp in Boost 1.74 calls isnan unqualified; <math.h> puts it in the global namespace.
#include <math.h>

#include <boost/math/interpolators/pchip.hpp>
#include <memory>
#include <vector>

namespace overfit::correction::detail {

/// PCHIP through four or more points, linear through two or three. Exact at
/// the nodes; throws DomainError outside [x.front(), x.back()].
class MonotoneInterp {
 public:
  MonotoneInterp(std::vector<double> x, std::vector<double> y);
  double operator()(double t) const;

 private:
  double lo_ = 0.0, hi_ = 0.0;
  std::shared_ptr<boost::math::interpolators::pchip<std::vector<double>>> pchip_;
  std::vector<double> x_, y_;
};

}  // namespace overfit::correction::detail
