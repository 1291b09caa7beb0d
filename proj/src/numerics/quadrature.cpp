#include "overfit/numerics/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "overfit/error.hpp"

namespace overfit::numerics {
namespace {

// Jacobi-matrix coefficients of the monic three-term recurrence
//   p_{k+1}(x) = (x - alpha_k) p_k(x) - beta_k p_{k-1}(x)
// for the probability-normalised measure of each kind.
struct Recurrence {
  std::vector<double> alpha;      // k = 0..n-1
  std::vector<double> sqrt_beta;  // k = 0..n, sqrt_beta[0] unused
};

Recurrence recurrence(RuleKind kind, int n) {
  Recurrence r;
  r.alpha.resize(n);
  r.sqrt_beta.assign(n + 1, 0.0);
  for (int k = 0; k < n; ++k) {
    switch (kind) {
      case RuleKind::Hermite: r.alpha[k] = 0.0; break;
      case RuleKind::Laguerre: r.alpha[k] = 2.0 * k + 1.0; break;
      case RuleKind::Legendre: r.alpha[k] = 0.5; break;
    }
  }
  for (int k = 1; k <= n; ++k) {
    switch (kind) {
      case RuleKind::Hermite: r.sqrt_beta[k] = std::sqrt(static_cast<double>(k)); break;
      case RuleKind::Laguerre: r.sqrt_beta[k] = k; break;
      case RuleKind::Legendre: r.sqrt_beta[k] = 0.5 * k / std::sqrt(4.0 * k * k - 1.0); break;
    }
  }
  return r;
}

// Evaluates the orthonormal p_n(x), p_n'(x) and log of sum_{k<n} p_k(x)^2,
// rescaling on the fly so that Laguerre tails at high order stay finite.
struct Eval {
  double pn;
  double dpn;
  double log_christoffel_sum;
};

Eval evaluate(const Recurrence& r, int n, double x) {
  double p_prev = 0.0, p = 1.0;
  double d_prev = 0.0, d = 0.0;
  double sum = 0.0;
  double log_scale = 0.0;
  for (int k = 0; k < n; ++k) {
    sum += p * p;
    const double p_next = ((x - r.alpha[k]) * p - r.sqrt_beta[k] * p_prev) / r.sqrt_beta[k + 1];
    const double d_next = (p + (x - r.alpha[k]) * d - r.sqrt_beta[k] * d_prev) / r.sqrt_beta[k + 1];
    p_prev = p;
    p = p_next;
    d_prev = d;
    d = d_next;
    const double mag = std::max(std::abs(p), std::abs(p_prev));
    if (mag > 1e100) {
      const double s = 1.0 / mag;
      p *= s;
      p_prev *= s;
      d *= s;
      d_prev *= s;
      sum *= s * s;
      log_scale += 2.0 * std::log(mag);
    }
  }
  return {p, d, std::log(sum) + log_scale};
}

}  // namespace

std::string_view to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::Hermite: return "hermite";
    case RuleKind::Laguerre: return "laguerre";
    case RuleKind::Legendre: return "legendre";
  }
  return "unknown";
}

QuadratureRule gauss_rule(RuleKind kind, int order) {
  if (order < 1 || order > kMaxRuleOrder)
    throw DomainError("gauss_rule: unsupported order " + std::to_string(order));

  const Recurrence rec = recurrence(kind, order);
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int k = 0; k < order; ++k) {
    jacobi(k, k) = rec.alpha[k];
    if (k + 1 < order) {
      jacobi(k, k + 1) = rec.sqrt_beta[k + 1];
      jacobi(k + 1, k) = rec.sqrt_beta[k + 1];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi, Eigen::EigenvaluesOnly);

  QuadratureRule rule{kind, order, {}, {}};
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int i = 0; i < order; ++i) {
    double x = eig.eigenvalues()(i);
    for (int it = 0; it < 3; ++it) {
      const Eval e = evaluate(rec, order, x);
      if (e.dpn == 0.0) break;
      const double step = e.pn / e.dpn;
      x -= step;
      if (std::abs(step) <= 2e-16 * (1.0 + std::abs(x))) break;
    }
    rule.nodes[i] = x;
    rule.weights[i] = std::exp(-evaluate(rec, order, x).log_christoffel_sum);
  }
  // Symmetric measures: enforce exact symmetry of the rule.
  if (kind == RuleKind::Hermite || kind == RuleKind::Legendre) {
    const double centre = kind == RuleKind::Hermite ? 0.0 : 0.5;
    for (int i = 0, j = order - 1; i < j; ++i, --j) {
      const double h = 0.5 * ((centre - rule.nodes[i]) + (rule.nodes[j] - centre));
      rule.nodes[i] = centre - h;
      rule.nodes[j] = centre + h;
      const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
      rule.weights[i] = rule.weights[j] = w;
    }
    if (order % 2 == 1) rule.nodes[order / 2] = centre;
  }
  return rule;
}

}  // namespace overfit::numerics
