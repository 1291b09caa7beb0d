#pragma once

#include <string_view>
#include <vector>

namespace overfit::numerics {

enum class RuleKind {
  Hermite,   // standard normal measure N(0,1)
  Laguerre,  // exp(-x) on [0, inf)
  Legendre,  // uniform on [0, 1]
};

std::string_view to_string(RuleKind kind);

/// Gaussian rule for one of the probability measures above, so that
/// sum_i weights[i] * g(nodes[i]) approximates E[g(X)].
struct QuadratureRule {
  RuleKind kind;
  int order;
  std::vector<double> nodes;
  std::vector<double> weights;

  template <class F>
  double integrate(F&& g) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * g(nodes[i]);
    return acc;
  }
};

inline constexpr int kMaxRuleOrder = 256;
inline constexpr int kDefaultRuleOrder = 64;

/// Builds the rule by Golub-Welsch, then polishes nodes by Newton on the
/// orthonormal recurrence and takes weights from the Christoffel function.
/// Throws DomainError for order outside [1, kMaxRuleOrder].
QuadratureRule gauss_rule(RuleKind kind, int order);

}  // namespace overfit::numerics
