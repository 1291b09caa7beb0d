#include <cmath>

#include "detail.hpp"
#include "overfit/numerics/scalar_solvers.hpp"

namespace overfit::rs {

namespace {

double sech2(double x) {
  const double e = std::exp(-2.0 * std::abs(x));
  return 4.0 * e / ((1.0 + e) * (1.0 + e));
}

// With x = r/2 the logistic prox condition reads
//   x = -(Y + d)/2 - (a^2/2) tanh x,   Y = bQ - f/c,   f standard logistic.
struct LogLogisticSystem {
  detail::LineQuadrature line;

  explicit LogLogisticSystem(const RsConfig& cfg)
      : line(cfg.hermite_order, noise_rule(models::Noise::Logistic, cfg.noise_order)) {}

  struct Sums {
    double tanh2 = 0.0, ratio = 0.0, tanh = 0.0, xtanh = 0.0;
  };

  Sums sums(const Rescaled& r) const {
    Sums s;
    const double a2 = r.a * r.a;
    const detail::LineRule t = line(r.b, -1.0 / r.c);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double A = -0.5 * (t.y[i] + r.d);
      const double x = numerics::solve_a_minus_b_tanh(A, 0.5 * a2);
      const double th = std::tanh(x);
      const double s2 = sech2(x);
      s.tanh2 += t.w[i] * th * th;
      s.ratio += t.w[i] * a2 * s2 / (2.0 + a2 * s2);
      s.tanh += t.w[i] * th;
      s.xtanh += t.w[i] * 2.0 * x * th;
    }
    return s;
  }

  Eigen::VectorXd residual(double zeta, const Rescaled& r) const {
    const Sums s = sums(r);
    const double a2 = r.a * r.a;
    Eigen::VectorXd out(4);
    out << a2 * a2 * s.tanh2 / (zeta * r.b * r.b) - 1.0, s.ratio / zeta - 1.0, s.tanh, s.xtanh - 1.0;
    return out;
  }
};

Rescaled from_x(const Eigen::VectorXd& x) { return {std::exp(x(0)), std::exp(x(1)), std::exp(x(2)), x(3)}; }

Eigen::VectorXd to_x(const Rescaled& r) {
  Eigen::VectorXd x(4);
  x << std::log(r.a), std::log(r.b), std::log(r.c), r.d;
  return x;
}

}  // namespace

RSSolution solve_rs_loglogistic(double zeta, const RsConfig& cfg, const models::NoiseParams& truth,
                                const RSSolution* warm) {
  detail::check_zeta(zeta, "solve_rs_loglogistic");
  validate(cfg);
  models::validate(models::Noise::Logistic, truth);
  const LogLogisticSystem sys(cfg);
  auto F = [&](double z, const Eigen::VectorXd& x) { return sys.residual(z, from_x(x)); };

  double z0;
  Eigen::VectorXd x0;
  if (warm && warm->converged && warm->noise == models::Noise::Logistic) {
    z0 = warm->zeta;
    x0 = to_x(warm->rescaled);
  } else {
    z0 = detail::cold_start_zeta(zeta);
    const double s = std::sqrt(3.0 * z0);
    x0 = to_x({s, s, 1.0, 0.0});
  }
  const detail::PathResult path = detail::follow_path(F, z0, x0, zeta, cfg);
  const Rescaled r = from_x(path.x);

  RSSolution s = detail::assemble_location_scale(zeta, r, truth, models::Noise::Logistic);
  s.residual = sys.residual(zeta, r).lpNorm<Eigen::Infinity>();
  s.converged = path.converged;
  s.iterations = path.iterations;
  s.mean_tanh = sys.sums(r).tanh;
  return s;
}

namespace detail {
Eigen::VectorXd loglogistic_residuals(double zeta, const Rescaled& r, const RsConfig& cfg) {
  return LogLogisticSystem(cfg).residual(zeta, r);
}
}  // namespace detail

}  // namespace overfit::rs
