#include <cmath>

#include "detail.hpp"
#include "overfit/error.hpp"
#include "overfit/numerics/scalar_solvers.hpp"

namespace overfit::rs {

namespace {

// Unknowns are packed as (w, log v, log u, phi[, log shape]); in the linear
// reduction w is held at S and the Z0 axis collapses to a single node,
// because with w = S the prox point depends on Y - S Z0 only.
class GeneralSystem {
 public:
  GeneralSystem(double S, models::Noise noise, const models::NoiseParams& truth, const RsConfig& cfg, bool linear)
      : S_(S), noise_(noise), truth_(truth), linear_(linear), fixed_shape_(cfg.fixed_shape) {
    const int order = linear ? cfg.hermite_order : cfg.generic_order;
    const int noise_order = linear ? cfg.noise_order : cfg.generic_order;
    q_ = numerics::gauss_rule(numerics::RuleKind::Hermite, order);
    if (linear) {
      z0_.nodes = {0.0};
      z0_.weights = {1.0};
    } else {
      z0_ = numerics::gauss_rule(numerics::RuleKind::Hermite, order);
    }
    const NoiseRule std_rule = noise_rule(noise, noise_order, truth.theta);
    const double scale = models::has_scale(noise) ? truth.sigma : 1.0;
    for (std::size_t k = 0; k < std_rule.size(); ++k) {
      const double z = truth.phi + scale * std_rule.nodes[k];
      zrule_.nodes.push_back(z);
      zrule_.weights.push_back(std_rule.weights[k]);
      // d/dz of -log p_Z at the true parameters, for the w equation.
      true_score_.push_back(models::neg_log_noise(noise, truth, z).d1);
    }
    info_ = detail::location_information(noise, std_rule, truth.theta) / (scale * scale);
  }

  int dim() const { return (linear_ ? 3 : 4) + (fixed_shape_ ? 0 : 1); }

  struct Point {
    double w, v, u;
    models::NoiseParams params;
  };

  Point unpack(const Eigen::VectorXd& x) const {
    Point p;
    int i = 0;
    p.w = linear_ ? S_ : x(i++);
    p.v = std::exp(x(i++));
    p.u = std::exp(x(i++));
    p.params.phi = x(i++);
    p.params.sigma = 1.0;
    p.params.theta = 0.0;
    p.params.set_shape(noise_, fixed_shape_ ? *fixed_shape_ : std::exp(x(i++)));
    return p;
  }

  Eigen::VectorXd pack(const Point& p) const {
    Eigen::VectorXd x(dim());
    int i = 0;
    if (!linear_) x(i++) = p.w;
    x(i++) = std::log(p.v);
    x(i++) = std::log(p.u);
    x(i++) = p.params.phi;
    if (!fixed_shape_) x(i++) = std::log(p.params.shape(noise_));
    return x;
  }

  // Near zeta = 0 the fit is the pseudo-true location under the working
  // shape, and u^2 = zeta/I, v^2 = zeta J/I^2 with I = E[h''], J = E[h'^2].
  Point cold_start(double zeta) const {
    Point p;
    p.w = S_;
    p.params = truth_;
    if (!fixed_shape_ || *fixed_shape_ == truth_.shape(noise_)) {
      p.v = p.u = std::sqrt(zeta / info_);
      return p;
    }
    p.params.set_shape(noise_, *fixed_shape_);
    auto mean_score = [&](double phi) {
      models::NoiseParams q = p.params;
      q.phi = phi;
      double acc = 0.0;
      for (std::size_t k = 0; k < zrule_.size(); ++k)
        acc += zrule_.weights[k] * models::neg_log_noise(noise_, q, zrule_.nodes[k]).d1;
      return acc;
    };
    // The score in z is increasing for these log-concave families, so the mean
    // score decreases in phi.
    // Heavy-tailed truths (frailty with theta0 >= 1 fitted at theta = 0) have
    // no finite pseudo-true location; the truth is then the best available start.
    double lo = truth_.phi - 1.0, hi = truth_.phi + 1.0;
    for (int i = 0; i < 20 && mean_score(lo) < 0.0; ++i) lo -= 2.0;
    for (int i = 0; i < 20 && mean_score(hi) > 0.0; ++i) hi += 2.0;
    const double flo = mean_score(lo), fhi = mean_score(hi);
    if (!(std::isfinite(flo) && std::isfinite(fhi) && flo >= 0.0 && fhi <= 0.0)) {
      p.v = p.u = std::sqrt(zeta / info_);
      return p;
    }
    p.params.phi = numerics::bracketed_root(mean_score, lo, hi, 1e-14);
    double I = 0.0, J = 0.0;
    for (std::size_t k = 0; k < zrule_.size(); ++k) {
      const numerics::Jet h = models::neg_log_noise(noise_, p.params, zrule_.nodes[k]);
      I += zrule_.weights[k] * h.d2;
      J += zrule_.weights[k] * h.d1 * h.d1;
    }
    p.u = std::sqrt(zeta / I);
    p.v = std::sqrt(zeta * J) / I;
    return p;
  }

  Eigen::VectorXd residual(double zeta, const Point& p) const {
    models::validate(noise_, p.params);
    const models::Noise n = noise_;
    const models::NoiseParams& prm = p.params;
    double dev2 = 0.0, slope = 0.0, cross = 0.0, score_phi = 0.0, score_shape = 0.0;
    for (std::size_t i = 0; i < z0_.nodes.size(); ++i) {
      const double Z0 = z0_.nodes[i];
      for (std::size_t j = 0; j < q_.nodes.size(); ++j) {
        const double nu = p.v * q_.nodes[j] + (linear_ ? 0.0 : p.w * Z0);
        for (std::size_t k = 0; k < zrule_.nodes.size(); ++k) {
          const double wt = z0_.weights[i] * q_.weights[j] * zrule_.weights[k];
          const double Y = (linear_ ? 0.0 : S_ * Z0) + zrule_.nodes[k];
          auto H = [&](double xi) {
            const numerics::Jet j = models::neg_log_noise(n, prm, Y - xi);
            return numerics::Jet{j.value, -j.d1, j.d2};
          };
          const double xi = numerics::prox_minimize(nu, p.u, H);
          const double e = Y - xi;
          const numerics::Jet h = models::neg_log_noise(n, prm, e);
          const std::array<double, 2> sc = models::noise_score(n, prm, e);
          dev2 += wt * (xi - nu) * (xi - nu);
          slope += wt / (1.0 + p.u * p.u * h.d2);
          cross += wt * xi * S_ * true_score_[k];
          score_phi += wt * sc[0];
          score_shape += wt * sc[1];
        }
      }
    }
    const double scale = models::has_scale(n) ? prm.sigma : 1.0;
    Eigen::VectorXd out(dim());
    int i = 0;
    out(i++) = dev2 / (zeta * p.v * p.v) - 1.0;
    out(i++) = slope / (1.0 - zeta) - 1.0;
    if (!linear_) out(i++) = (cross - p.w * zeta) / (zeta * S_);
    out(i++) = score_phi * scale;
    if (!fixed_shape_) out(i++) = score_shape * scale;
    return out;
  }

  RSSolution assemble(double zeta, const Point& p) const {
    RSSolution s;
    s.noise = noise_;
    s.zeta = zeta;
    s.S = S_;
    s.w_star = p.w;
    s.v_star = p.v;
    s.u_star = p.u;
    s.nuisance0 = truth_;
    s.nuisance_star = p.params;
    if (models::has_scale(noise_)) {
      const double sg = p.params.sigma;
      s.rescaled = {p.u / sg, p.v / sg, sg / truth_.sigma, (p.params.phi - truth_.phi) / sg};
    } else {
      s.rescaled = {p.u, p.v, p.params.phi - truth_.phi, p.params.theta};
      s.boundary = p.params.theta == 0.0;
    }
    return s;
  }

 private:
  double S_;
  models::Noise noise_;
  models::NoiseParams truth_;
  bool linear_;
  std::optional<double> fixed_shape_;
  numerics::QuadratureRule q_, z0_;
  NoiseRule zrule_;
  std::vector<double> true_score_;
  double info_ = 1.0;
};

RSSolution solve_general(double zeta, double S, models::Noise noise, const models::NoiseParams& truth,
                         const RsConfig& cfg, const RSSolution* warm, bool linear, const char* who) {
  detail::check_zeta(zeta, who);
  validate(cfg);
  models::validate(noise, truth);
  if (!(S > 0.0) || !std::isfinite(S)) throw DomainError(std::string(who) + ": S must be positive");
  if (cfg.fixed_shape) {
    models::NoiseParams probe = truth;
    probe.set_shape(noise, *cfg.fixed_shape);
    models::validate(noise, probe);
  }
  const GeneralSystem sys(S, noise, truth, cfg, linear);
  auto F = [&](double z, const Eigen::VectorXd& x) { return sys.residual(z, sys.unpack(x)); };

  double z0;
  Eigen::VectorXd x0;
  if (warm && warm->converged && warm->noise == noise && warm->zeta <= zeta) {
    z0 = warm->zeta;
    GeneralSystem::Point p{warm->w_star * S / warm->S, warm->v_star, warm->u_star, warm->nuisance_star};
    x0 = sys.pack(p);
  } else {
    z0 = detail::cold_start_zeta(zeta);
    x0 = sys.pack(sys.cold_start(z0));
  }
  const detail::PathResult path = detail::follow_path(F, z0, x0, zeta, cfg);
  const GeneralSystem::Point p = sys.unpack(path.x);
  RSSolution s = sys.assemble(zeta, p);
  s.residual = sys.residual(zeta, p).lpNorm<Eigen::Infinity>();
  s.converged = path.converged;
  s.iterations = path.iterations;
  return s;
}

}  // namespace

RSSolution solve_rs_generic(double zeta, double S, models::Noise noise, const models::NoiseParams& nuisance0,
                            const RsConfig& cfg, const RSSolution* warm) {
  return solve_general(zeta, S, noise, nuisance0, cfg, warm, false, "solve_rs_generic");
}

RSSolution solve_rs_linear(double zeta, models::Noise noise, const models::NoiseParams& nuisance0, const RsConfig& cfg,
                           double S, const RSSolution* warm) {
  RSSolution s = solve_general(zeta, S, noise, nuisance0, cfg, warm, true, "solve_rs_linear");
  s.w_star = S;
  return s;
}

}  // namespace overfit::rs
