#include "overfit/numerics/fixed_point.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <optional>

#include "overfit/error.hpp"

namespace overfit::numerics {

void validate(const FixedPointConfig& cfg) {
  if (!(cfg.damping > 0.0 && cfg.damping <= 1.0)) throw DomainError("FixedPointConfig: damping must be in (0,1]");
  if (!(cfg.tol > 0.0)) throw DomainError("FixedPointConfig: tol must be positive");
  if (cfg.max_iter < 1) throw DomainError("FixedPointConfig: max_iter must be positive");
  if (cfg.continuation_steps < 0) throw DomainError("FixedPointConfig: continuation_steps must be >= 0");
}

FixedPointResult damped_fixed_point(const VectorMap& map, Eigen::VectorXd x0, const FixedPointConfig& cfg) {
  validate(cfg);
  if (!x0.allFinite()) throw NumericalError("damped_fixed_point: non-finite starting point");
  FixedPointResult out;
  out.x = std::move(x0);
  for (int it = 0; it < cfg.max_iter; ++it) {
    const Eigen::VectorXd mx = map(out.x);
    if (!mx.allFinite()) throw NumericalError("damped_fixed_point: map returned NaN/Inf");
    out.residual = (mx - out.x).lpNorm<Eigen::Infinity>();
    out.iterations = it;
    if (out.residual <= cfg.tol) {
      out.converged = true;
      return out;
    }
    out.x = (1.0 - cfg.damping) * out.x + cfg.damping * mx;
  }
  out.iterations = cfg.max_iter;
  const Eigen::VectorXd mx = map(out.x);
  out.residual = (mx - out.x).lpNorm<Eigen::Infinity>();
  out.converged = out.residual <= cfg.tol;
  return out;
}

namespace {

std::optional<Eigen::VectorXd> try_eval(const VectorMap& f, const Eigen::VectorXd& x) {
  try {
    Eigen::VectorXd r = f(x);
    if (!r.allFinite()) return std::nullopt;
    return r;
  } catch (const DomainError&) {
    return std::nullopt;
  } catch (const ConvergenceError&) {
    return std::nullopt;
  }
}

}  // namespace

NewtonResult newton_solve(const VectorMap& residual, Eigen::VectorXd x0, const NewtonConfig& cfg) {
  NewtonResult out;
  out.x = std::move(x0);
  auto r0 = try_eval(residual, out.x);
  if (!r0) throw NumericalError("newton_solve: residual undefined at starting point");
  Eigen::VectorXd r = *r0;
  const Eigen::Index n = out.x.size();
  double mu = 1e-6;

  for (int it = 0; it < cfg.max_iter; ++it) {
    out.iterations = it;
    out.residual = r.lpNorm<Eigen::Infinity>();
    if (out.residual <= cfg.tol) {
      out.converged = true;
      return out;
    }
    Eigen::MatrixXd jac(r.size(), n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double h = cfg.fd_step * (1.0 + std::abs(out.x(k)));
      Eigen::VectorXd xp = out.x, xm = out.x;
      xp(k) += h;
      xm(k) -= h;
      auto rp = try_eval(residual, xp);
      auto rm = try_eval(residual, xm);
      if (rp && rm) {
        jac.col(k) = (*rp - *rm) / (2.0 * h);
      } else if (rp) {
        jac.col(k) = (*rp - r) / h;
      } else if (rm) {
        jac.col(k) = (r - *rm) / h;
      } else {
        throw NumericalError("newton_solve: Jacobian column undefined");
      }
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * r;
    const double norm0 = r.squaredNorm();
    bool accepted = false;
    for (int tries = 0; tries < 40; ++tries) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += mu * (jtj.diagonal().array() + 1e-12).matrix();
      const Eigen::VectorXd step = -a.ldlt().solve(jtr);
      const Eigen::VectorXd xn = out.x + step;
      auto rn = try_eval(residual, xn);
      if (rn && rn->squaredNorm() < norm0) {
        out.x = xn;
        r = *rn;
        mu = std::max(mu * 0.1, 1e-12);
        accepted = true;
        break;
      }
      mu *= 10.0;
    }
    if (!accepted) break;
  }
  out.residual = r.lpNorm<Eigen::Infinity>();
  out.converged = out.residual <= cfg.tol;
  return out;
}

}  // namespace overfit::numerics
