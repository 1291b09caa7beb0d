#pragma once

#include <Eigen/Core>
#include <functional>

namespace overfit::numerics {

using VectorMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct FixedPointConfig {
  double damping = 0.5;         // in (0, 1]
  int max_iter = 10000;
  double tol = 1e-8;            // sup-norm of x - map(x)
  int continuation_steps = 8;   // warm-start stages used by sweeping callers
};

void validate(const FixedPointConfig& cfg);

struct FixedPointResult {
  Eigen::VectorXd x;
  double residual = 0.0;  // ||x - map(x)||_inf at the returned x
  int iterations = 0;
  bool converged = false;
};

/// Iterates x <- (1 - damping) x + damping map(x) until ||x - map(x)||_inf <= tol.
/// Returns converged = false with the last residual when max_iter is hit;
/// throws NumericalError if map produces NaN/Inf.
FixedPointResult damped_fixed_point(const VectorMap& map, Eigen::VectorXd x0, const FixedPointConfig& cfg);

struct NewtonConfig {
  double tol = 1e-12;  // sup-norm of the residual vector
  int max_iter = 100;
  double fd_step = 1e-7;
};

struct NewtonResult {
  Eigen::VectorXd x;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Levenberg-Marquardt damped Newton for residual(x) = 0 with a
/// central-difference Jacobian. Residual evaluations that throw DomainError
/// or return non-finite values are treated as rejected steps.
NewtonResult newton_solve(const VectorMap& residual, Eigen::VectorXd x0, const NewtonConfig& cfg = {});

}  // namespace overfit::numerics
