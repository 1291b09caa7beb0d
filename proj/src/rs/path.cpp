#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "detail.hpp"
#include "overfit/error.hpp"

namespace overfit::rs {

RsConfig RsConfig::doubled() const {
  RsConfig out = *this;
  out.hermite_order = std::min(2 * hermite_order, numerics::kMaxRuleOrder);
  out.noise_order = std::min(2 * noise_order, numerics::kMaxRuleOrder);
  out.generic_order = std::min(2 * generic_order, numerics::kMaxRuleOrder);
  return out;
}

void validate(const RsConfig& cfg) {
  if (cfg.hermite_order < 2 || cfg.hermite_order > numerics::kMaxRuleOrder ||
      cfg.noise_order < 2 || cfg.noise_order > numerics::kMaxRuleOrder || cfg.generic_order < 2 ||
      cfg.generic_order > numerics::kMaxRuleOrder)
    throw DomainError("RsConfig: quadrature orders must lie in [2, 256]");
  if (!(cfg.tol > 0.0)) throw DomainError("RsConfig: tol must be positive");
  if (cfg.max_newton < 1) throw DomainError("RsConfig: max_newton must be positive");
  numerics::validate(cfg.fp);
}

}  // namespace overfit::rs

namespace overfit::rs::detail {

RSSolution cation_scale(double zeta, const Rescaled& r, const models::NoiseParams& truth, models::Noise noise) {
  RSSolution s;
  s.noise = noise;
  s.zeta = zeta;
  s.nuisance0 = truth;
  s.rescaled = r;
  const double sigma = r.c * truth.sigma;
  s.nuisance_star.sigma = sigma;
  s.nuisance_star.phi = truth.phi + r.d * sigma;
  s.u_star = r.a * sigma;
  s.v_star = r.b * sigma;
  s.w_star = s.S;
  return s;
}

RSSolution assemble_location_scale(double zeta, const Rescaled& r, const models::NoiseParams& truth,
                                   models::Noise noise) {
  RSSolution s;
  s.noise = noise;
  s.zeta = zeta;
  s.nuisance0 = truth;
  s.rescaled = r;
  const double sigma = r.c * truth.sigma;
  s.nuisance_star.sigma = sigma;
  s.nuisance_star.phi = truth.phi + r.d * sigma;
  s.u_star = r.a * sigma;
  s.v_star = r.b * sigma;
  s.w_star = s.S;
  return s;
}

void check_zeta(double zeta, const char* who) {
  if (!(zeta > 0.0 && zeta < 1.0)) throw DomainError(std::string(who) + ": zeta must lie in (0, 1)");
}

double cold_start_zeta(double zeta) { return std::min(zeta, 1e-3); }

double location_information(models::Noise noise, const NoiseRule& rule, double theta) {
  if (noise == models::Noise::GammaFrailty)
    return rule.integrate([&](double z) { return models::frailty_terms(z, theta).h_rr; });
  return rule.integrate([&](double z) { return models::standard_rho(noise, z).d2; });
}

LineQuadrature::LineQuadrature(int hermite_order, NoiseRule noise)
    : noise_(std::move(noise)), step_(25.6 / hermite_order) {
  for (int m = std::max(hermite_order / 2, 8);; m /= 2) {
    ladder_.push_back(numerics::gauss_rule(numerics::RuleKind::Hermite, m));
    if (m / 2 < 8) break;
  }
  for (std::size_t j = 0; j < noise_.size(); ++j)
    if (noise_.weights[j] > 1e-20) live_.push_back(j);
}

LineRule LineQuadrature::operator()(double b, double s) const {
  LineRule r;
  if (b <= kSwitchScale) {
    std::size_t k = 0;
    for (double cap = 0.5 * kSwitchScale; k + 1 < ladder_.size() && b <= cap; cap *= 0.5) ++k;
    const numerics::QuadratureRule& herm = ladder_[k];
    const std::size_t n = herm.nodes.size() * noise_.size();
    r.y.reserve(n);
    r.w.reserve(n);
    r.wz.reserve(n);
    for (std::size_t i = 0; i < herm.nodes.size(); ++i)
      for (std::size_t j = 0; j < noise_.size(); ++j) {
        const double w = herm.weights[i] * noise_.weights[j];
        r.y.push_back(b * herm.nodes[i] + s * noise_.nodes[j]);
        r.w.push_back(w);
        r.wz.push_back(w * noise_.nodes[j]);
      }
    return r;
  }
  constexpr double kReach = 10.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t j : live_) {
    lo = std::min(lo, s * noise_.nodes[j]);
    hi = std::max(hi, s * noise_.nodes[j]);
  }
  lo -= kReach * b;
  hi += kReach * b;
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / step_)) + 1;
  const double h = (hi - lo) / static_cast<double>(n - 1);
  const double norm = h / (b * std::sqrt(2.0 * std::numbers::pi));
  r.y.resize(n);
  r.w.assign(n, 0.0);
  r.wz.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double y = lo + h * static_cast<double>(k);
    double w = 0.0, wz = 0.0;
    for (std::size_t j : live_) {
      const double u = (y - s * noise_.nodes[j]) / b;
      if (std::abs(u) > kReach) continue;
      const double kern = noise_.weights[j] * std::exp(-0.5 * u * u);
      w += kern;
      wz += kern * noise_.nodes[j];
    }
    r.y[k] = y;
    r.w[k] = norm * w;
    r.wz[k] = norm * wz;
  }
  return r;
}

PathResult follow_path(const ZetaResidual& F, double zeta_from, Eigen::VectorXd x_from, double zeta_to,
                       const RsConfig& cfg, const std::function<bool(double, const Eigen::VectorXd&)>& give_up) {
  numerics::NewtonConfig ncfg;
  ncfg.tol = cfg.tol;
  ncfg.max_iter = cfg.max_newton;

  auto solve_at = [&](double z, const Eigen::VectorXd& guess) {
    return numerics::newton_solve([&](const Eigen::VectorXd& x) { return F(z, x); }, guess, ncfg);
  };

  // Stages are uniform in logit(zeta), which refines them near both ends of (0, 1).
  auto logit = [](double z) { return std::log(z / (1.0 - z)); };
  auto expit = [](double s) { return 1.0 / (1.0 + std::exp(-s)); };

  PathResult out;
  out.zeta_reached = zeta_from;
  double z = zeta_from;
  double s = logit(z);
  const double s_to = logit(zeta_to);
  Eigen::VectorXd x = std::move(x_from);
  Eigen::VectorXd x_prev;
  double s_prev = s;
  const int stages = std::max(1, cfg.fp.continuation_steps);
  double step = (s_to - s) / stages;
  const double min_step = 1e-6 * std::max(std::abs(s_to - s), 1e-3);

  // The starting point itself is polished first.
  {
    numerics::NewtonResult r;
    try {
      r = solve_at(z, x);
    } catch (const NumericalError&) {
      r.converged = false;
    }
    out.iterations += r.iterations;
    if (!r.converged) {
      out.x = x;
      out.residual = r.residual;
      return out;
    }
    x = r.x;
    out.residual = r.residual;
  }

  while (z != zeta_to) {
    const bool last = std::abs(step) >= std::abs(s_to - s);
    if (last) step = s_to - s;
    const double sn = last ? s_to : s + step;
    const double zn = last ? zeta_to : expit(sn);
    Eigen::VectorXd guess = x;
    if (x_prev.size() == x.size() && s != s_prev) guess = x + (x - x_prev) * (step / (s - s_prev));
    numerics::NewtonResult r;
    bool ok = false;
    try {
      r = solve_at(zn, guess);
      ok = r.converged;
    } catch (const NumericalError&) {
      ok = false;
    }
    out.iterations += r.iterations;
    if (!ok) {
      step *= 0.5;
      if (std::abs(step) < min_step || (give_up && give_up(z, x))) {
        out.x = x;
        out.residual = r.residual;
        out.converged = false;
        return out;
      }
      continue;
    }
    x_prev = x;
    s_prev = s;
    x = r.x;
    s = sn;
    z = zn;
    out.zeta_reached = z;
    out.residual = r.residual;
    step *= 1.5;
  }
  out.x = x;
  out.converged = true;
  return out;
}

}  // namespace overfit::rs::detail
