#include <boost/math/constants/constants.hpp>
#include <cmath>
#include <memory>

#include "detail.hpp"
#include "overfit/error.hpp"
#include "overfit/numerics/lambert_w.hpp"
#include "overfit/numerics/scalar_solvers.hpp"

namespace overfit::rs {

namespace {

// Prox of the Gumbel noise in rescaled units: W = W0(X) with
//   log X = 2 log a + a^2 + d + Y,   Y = b Q + log(F) / c,   F ~ Exp(1), log F = -z.
struct WeibullSystem {
  detail::LineQuadrature line;

  explicit WeibullSystem(const RsConfig& cfg)
      : line(cfg.hermite_order, noise_rule(models::Noise::Gumbel, cfg.noise_order)) {}

  static double log_x(const Rescaled& r, double y) { return 2.0 * std::log(r.a) + r.a * r.a + r.d + y; }

  Eigen::VectorXd residual(double zeta, const Rescaled& r) const {
    const detail::LineRule t = line(r.b, -1.0 / r.c);
    const double a2 = r.a * r.a;
    double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double lx = log_x(r, t.y[i]);
      const double W = numerics::lambert_w0_exp(lx);
      const double rr = std::log(a2) - (lx - W);
      s1 += t.w[i] * (a2 - W) * (a2 - W);
      s2 += t.w[i] * W / (1.0 + W);
      s3 += t.w[i] * W;
      s4 += t.w[i] * rr * (1.0 - W / a2);
    }
    Eigen::VectorXd out(4);
    out << s1 / (zeta * r.b * r.b) - 1.0, s2 / zeta - 1.0, s3 / a2 - 1.0, s4 - 1.0;
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

numerics::VectorMap weibull_fixed_point_map(double zeta, const RsConfig& cfg) {
  detail::check_zeta(zeta, "weibull_fixed_point_map");
  auto sys = std::make_shared<WeibullSystem>(cfg);
  return [sys, zeta](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    Rescaled r{v(0), v(1), v(2), v(3)};
    if (!(r.a > 0.0 && r.b > 0.0 && r.c > 0.0)) throw NumericalError("weibull_fixed_point_map: left the domain");
    const detail::LineRule t = sys->line(r.b, -1.0 / r.c);
    auto mean_ratio = [&](double log_a) {
      Rescaled q = r;
      q.a = std::exp(log_a);
      double acc = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double W = numerics::lambert_w0_exp(WeibullSystem::log_x(q, t.y[i]));
        acc += t.w[i] * W / (1.0 + W);
      }
      return acc - zeta;
    };
    double lo = std::log(r.a) - 1.0, hi = std::log(r.a) + 1.0;
    while (mean_ratio(lo) > 0.0) lo -= 2.0;
    while (mean_ratio(hi) < 0.0) hi += 2.0;
    r.a = std::exp(numerics::bracketed_root(mean_ratio, lo, hi, 1e-15));
    const double a2 = r.a * r.a;
    double s1 = 0.0, s3 = 0.0, s5 = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double W = numerics::lambert_w0_exp(WeibullSystem::log_x(r, t.y[i]));
      s1 += t.w[i] * (a2 - W) * (a2 - W);
      s3 += t.w[i] * W;
      s5 -= t.wz[i] * W;
    }
    Eigen::VectorXd out(4);
    out << r.a, std::sqrt(s1 / zeta), boost::math::constants::euler<double>() + s5 / a2, r.d + std::log(a2 / s3);
    return out;
  };
}

RSSolution solve_rs_weibull(double zeta, const RsConfig& cfg, const models::NoiseParams& truth, const RSSolution* warm) {
  detail::check_zeta(zeta, "solve_rs_weibull");
  validate(cfg);
  models::validate(models::Noise::Gumbel, truth);
  const WeibullSystem sys(cfg);
  auto F = [&](double z, const Eigen::VectorXd& x) { return sys.residual(z, from_x(x)); };

  double z0;
  Eigen::VectorXd x0;
  if (warm && warm->converged && warm->noise == models::Noise::Gumbel) {
    z0 = warm->zeta;
    x0 = to_x(warm->rescaled);
  } else {
    z0 = detail::cold_start_zeta(zeta);
    const double s = std::sqrt(z0);
    x0 = to_x({s, s, 1.0, 0.0});
  }
  detail::PathResult path = detail::follow_path(F, z0, x0, zeta, cfg);
  Rescaled r = from_x(path.x);
  int iterations = path.iterations;
  bool converged = path.converged;

  if (!converged) {
    Eigen::VectorXd v(4);
    v << r.a, r.b, r.c, r.d;
    try {
      const numerics::FixedPointResult fp = numerics::damped_fixed_point(weibull_fixed_point_map(zeta, cfg), v, cfg.fp);
      iterations += fp.iterations;
      r = {fp.x(0), fp.x(1), fp.x(2), fp.x(3)};
      converged = fp.converged;
    } catch (const NumericalError&) {
      converged = false;
    }
  }

  RSSolution s = detail::assemble_location_scale(zeta, r, truth, models::Noise::Gumbel);
  s.residual = sys.residual(zeta, r).lpNorm<Eigen::Infinity>();
  s.converged = converged;
  s.iterations = iterations;
  return s;
}

namespace detail {
Eigen::VectorXd weibull_residuals(double zeta, const Rescaled& r, const RsConfig& cfg) {
  return WeibullSystem(cfg).residual(zeta, r);
}
}  // namespace detail

}  // namespace overfit::rs
