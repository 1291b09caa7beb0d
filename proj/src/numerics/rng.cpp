#include "overfit/numerics/rng.hpp"

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

namespace overfit::numerics {

double uniform_open01(CounterRng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double standard_normal(CounterRng& rng) {
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

double gamma_draw(CounterRng& rng, double shape, double scale) {
  boost::random::gamma_distribution<double> dist(shape, scale);
  return dist(rng);
}

}  // namespace overfit::numerics
