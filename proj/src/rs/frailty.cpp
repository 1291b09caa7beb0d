#include <algorithm>
#include <cmath>

#include "detail.hpp"
#include "overfit/error.hpp"
#include "overfit/numerics/lambert_w.hpp"
#include "overfit/numerics/scalar_solvers.hpp"

namespace overfit::rs {

namespace {

constexpr double kThetaFloor = 1e-8;
constexpr double kKktTol = 1e-7;

// Interior system. With x = (log theta - r)/2 the prox condition becomes
//   x = A - B tanh x,  A = (Y + c + log theta)/2 + (a^2/4)(1 - 1/theta),  Y = bQ - z,
//                      B = (a^2/4)(1 + 1/theta),
// and the location score is (1 - 1/theta)/2 - (1 + 1/theta) tanh(x)/2, so its
// vanishing mean is E[tanh x] = (theta - 1)/(theta + 1).
// At theta = 0 the noise is Gumbel and the prox is a Lambert-W expression
//   W = W0(X),  log X = 2 log a + a^2 + c + Y.
struct FrailtySystem {
  detail::LineQuadrature line;

  FrailtySystem(const RsConfig& cfg, double theta0)
      : line(cfg.hermite_order, noise_rule(models::Noise::GammaFrailty, cfg.noise_order, theta0)) {}

  struct Sums {
    double k2 = 0.0, ratio = 0.0, tanh = 0.0, score_phi = 0.0, score_theta = 0.0;
  };

  // The equations are evaluated through the frailty derivatives at the prox
  // residual r = log theta - 2x; the tanh form of the scores cancels badly
  // as theta approaches zero.
  Sums interior_sums(const Rescaled& r) const {
    const double a2 = r.a * r.a, th = r.d, log_th = std::log(th);
    const double B = 0.25 * a2 * (1.0 + 1.0 / th);
    const double shift = 0.5 * (r.c + log_th) + 0.25 * a2 * (1.0 - 1.0 / th);
    Sums s;
    const detail::LineRule t = line(r.b, -1.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double A = 0.5 * t.y[i] + shift;
      const double x = numerics::solve_a_minus_b_tanh(A, B);
      const models::FrailtyTerms f = models::frailty_terms(log_th - 2.0 * x, th);
      const double g = a2 * f.h_rr;
      s.k2 += t.w[i] * a2 * a2 * f.h_r * f.h_r;
      s.ratio += t.w[i] * g / (1.0 + g);
      s.tanh += t.w[i] * std::tanh(x);
      s.score_phi += t.w[i] * f.h_r;
      s.score_theta += t.w[i] * f.h_t;
    }
    return s;
  }

  Eigen::VectorXd interior_residual(double zeta, const Rescaled& r) const {
    const Sums s = interior_sums(r);
    Eigen::VectorXd out(4);
    out << s.k2 / (zeta * r.b * r.b) - 1.0, s.ratio / zeta - 1.0, s.score_phi, s.score_theta;
    return out;
  }

  struct BoundarySums {
    double dev2 = 0.0, ratio = 0.0, w = 0.0, w2 = 0.0;
  };

  BoundarySums boundary_sums(const Rescaled& r) const {
    const double a2 = r.a * r.a;
    const double base = 2.0 * std::log(r.a) + a2 + r.c;
    BoundarySums s;
    const detail::LineRule t = line(r.b, -1.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double W = numerics::lambert_w0_exp(base + t.y[i]);
      s.dev2 += t.w[i] * (a2 - W) * (a2 - W);
      s.ratio += t.w[i] * W / (1.0 + W);
      s.w += t.w[i] * W;
      s.w2 += t.w[i] * W * W;
    }
    return s;
  }

  Eigen::VectorXd boundary_residual(double zeta, const Rescaled& r) const {
    const BoundarySums s = boundary_sums(r);
    Eigen::VectorXd out(3);
    out << s.dev2 / (zeta * r.b * r.b) - 1.0, s.ratio / zeta - 1.0, s.w / (r.a * r.a) - 1.0;
    return out;
  }

  /// Derivative of the expected log-likelihood in theta at theta = 0, in units of
  /// E[e^{-r}]^2: positive means the boundary is not optimal.
  double kkt(const Rescaled& r) const {
    const BoundarySums s = boundary_sums(r);
    const double a4 = r.a * r.a * r.a * r.a;
    return 0.5 * s.w2 / a4 - 1.0;
  }
};

Rescaled interior_from_x(const Eigen::VectorXd& x) {
  return {std::exp(x(0)), std::exp(x(1)), x(2), std::exp(x(3))};
}
Eigen::VectorXd interior_to_x(const Rescaled& r) {
  Eigen::VectorXd x(4);
  x << std::log(r.a), std::log(r.b), r.c, std::log(r.d);
  return x;
}
Rescaled boundary_from_x(const Eigen::VectorXd& x) { return {std::exp(x(0)), std::exp(x(1)), x(2), 0.0}; }
Eigen::VectorXd boundary_to_x(const Rescaled& r) {
  Eigen::VectorXd x(3);
  x << std::log(r.a), std::log(r.b), r.c;
  return x;
}

}  // namespace

RSSolution solve_rs_frailty(double zeta, double theta0, const RsConfig& cfg, double phi0, const RSSolution* warm) {
  detail::check_zeta(zeta, "solve_rs_frailty");
  validate(cfg);
  if (!(theta0 >= 0.0) || !std::isfinite(theta0)) throw DomainError("solve_rs_frailty: theta0 must be non-negative");
  if (!std::isfinite(phi0)) throw DomainError("solve_rs_frailty: phi0 must be finite");
  const FrailtySystem sys(cfg, theta0);

  auto interior = [&](double z, const Eigen::VectorXd& x) { return sys.interior_residual(z, interior_from_x(x)); };
  auto boundary = [&](double z, const Eigen::VectorXd& x) { return sys.boundary_residual(z, boundary_from_x(x)); };

  const bool usable_warm = warm && warm->converged && warm->noise == models::Noise::GammaFrailty &&
                           warm->nuisance0.theta == theta0 && warm->zeta <= zeta;
  int iterations = 0;
  Rescaled r;
  bool converged = false, at_boundary = false;

  // Boundary solve continued from a known point; accepted when the KKT condition holds.
  // The boundary system has a unique solution, so once it is found and fails
  // the KKT test there is no point in solving it again.
  bool boundary_rejected = false;
  auto try_boundary = [&](double z0, const Rescaled& start) {
    if (boundary_rejected) return false;
    const detail::PathResult p = detail::follow_path(boundary, z0, boundary_to_x(start), zeta, cfg);
    iterations += p.iterations;
    if (!p.converged) return false;
    const Rescaled rb = boundary_from_x(p.x);
    if (sys.kkt(rb) > kKktTol) {
      boundary_rejected = true;
      return false;
    }
    r = rb;
    converged = at_boundary = true;
    return true;
  };

  if (theta0 == 0.0 || (usable_warm && warm->boundary)) {
    double z0;
    Rescaled start;
    if (usable_warm) {
      z0 = warm->zeta;
      start = warm->rescaled;
    } else {
      z0 = detail::cold_start_zeta(zeta);
      start = {std::sqrt(z0), std::sqrt(z0), 0.0, 0.0};
    }
    if (try_boundary(z0, start) || theta0 == 0.0) {
      RSSolution s;
      s.noise = models::Noise::GammaFrailty;
      s.zeta = zeta;
      s.nuisance0 = {phi0, 1.0, theta0};
      s.rescaled = converged ? r : start;
      s.rescaled.d = 0.0;
      s.nuisance_star = {phi0 + s.rescaled.c, 1.0, 0.0};
      s.u_star = s.rescaled.a;
      s.v_star = s.rescaled.b;
      s.w_star = s.S;
      s.boundary = true;
      s.converged = converged;
      s.iterations = iterations;
      s.residual = sys.boundary_residual(zeta, s.rescaled).lpNorm<Eigen::Infinity>();
      s.mean_tanh = -1.0;
      return s;
    }
  }

  double z0;
  Eigen::VectorXd x0;
  if (usable_warm && !warm->boundary) {
    z0 = warm->zeta;
    x0 = interior_to_x(warm->rescaled);
  } else {
    z0 = detail::cold_start_zeta(zeta);
    const double info = detail::location_information(models::Noise::GammaFrailty,
                                                      noise_rule(models::Noise::GammaFrailty, cfg.noise_order, theta0),
                                                      theta0);
    const double s = std::sqrt(z0 / info);
    x0 = interior_to_x({s, s, 0.0, theta0});
  }
  // When an interior stage fails the boundary is tried at the target; the
  // interior branch ends at the critical zeta where theta* reaches zero.
  auto boundary_holds = [&](double z, const Eigen::VectorXd& x) {
    Rescaled start = interior_from_x(x);
    start.d = 0.0;
    return try_boundary(z, start);
  };
  const detail::PathResult path = detail::follow_path(interior, z0, x0, zeta, cfg, boundary_holds);
  iterations += path.iterations;
  if (!at_boundary) {
    r = interior_from_x(path.x);
    converged = path.converged && r.d >= kThetaFloor;
    if (!converged) boundary_holds(path.zeta_reached, path.x);
  }

  RSSolution s;
  s.noise = models::Noise::GammaFrailty;
  s.zeta = zeta;
  s.nuisance0 = {phi0, 1.0, theta0};
  s.rescaled = r;
  s.u_star = r.a;
  s.v_star = r.b;
  s.w_star = s.S;
  s.converged = converged;
  s.boundary = at_boundary;
  s.iterations = iterations;
  if (at_boundary) {
    s.rescaled.d = 0.0;
    s.residual = sys.boundary_residual(zeta, s.rescaled).lpNorm<Eigen::Infinity>();
    s.mean_tanh = -1.0;
  } else {
    s.residual = sys.interior_residual(zeta, r).lpNorm<Eigen::Infinity>();
    s.mean_tanh = sys.interior_sums(r).tanh;
  }
  s.nuisance_star = {phi0 + s.rescaled.c, 1.0, s.rescaled.d};
  return s;
}

namespace detail {
Eigen::VectorXd frailty_residuals(double zeta, const Rescaled& r, const RsConfig& cfg, double theta0) {
  const FrailtySystem sys(cfg, theta0);
  return r.d == 0.0 ? sys.boundary_residual(zeta, r) : sys.interior_residual(zeta, r);
}
}  // namespace detail

}  // namespace overfit::rs
