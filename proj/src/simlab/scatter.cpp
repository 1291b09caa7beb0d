#include <algorithm>
#include <cmath>
#include <limits>

#include "overfit/error.hpp"
#include "overfit/numerics/rng.hpp"
#include "overfit/simlab/simlab.hpp"

namespace overfit::simlab {

ScatterStats scatter_stats(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta0) {
  if (beta_hat.size() != beta0.size()) throw DomainError("scatter_stats: vectors differ in length");
  if (beta0.size() < 2) throw DomainError("scatter_stats: need at least two components");
  const double b0b0 = beta0.squaredNorm();
  if (!(b0b0 > 0.0)) throw DomainError("scatter_stats: beta0 is identically zero");
  ScatterStats s;
  s.kappa = beta0.dot(beta_hat) / b0b0;
  const double rss = (beta_hat - s.kappa * beta0).squaredNorm();
  s.delta = std::sqrt(std::max(rss, 0.0) / static_cast<double>(beta0.size() - 1));
  return s;
}

std::uint64_t replicate_seed(std::uint64_t base_seed, std::size_t zeta_index, std::size_t replicate) {
  return numerics::derive_seed(numerics::derive_seed(base_seed, zeta_index), replicate);
}

Stat mean_se(const std::vector<double>& values) {
  Stat s;
  const std::size_t n = values.size();
  if (n == 0) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(n);
  if (n < 2) {
    s.se = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  return s;
}

ZetaSummary aggregate(double zeta, int p, int N, const std::vector<ReplicateResult>& reps) {
  ZetaSummary z;
  z.zeta = zeta;
  z.p = p;
  z.N = N;
  z.M = static_cast<int>(reps.size());
  std::vector<double> kappa, delta;
  std::vector<std::vector<double>> ratios;
  for (const ReplicateResult& r : reps) {
    if (!r.ok) {
      ++z.n_failed;
      continue;
    }
    ++z.n_converged;
    kappa.push_back(r.scatter.kappa);
    delta.push_back(r.scatter.delta);
    if (ratios.empty()) ratios.resize(r.ratios.size());
    if (r.ratios.size() != ratios.size()) throw DomainError("aggregate: replicates disagree on ratio columns");
    for (std::size_t k = 0; k < r.ratios.size(); ++k) ratios[k].push_back(r.ratios[k]);
  }
  z.kappa = mean_se(kappa);
  z.delta = mean_se(delta);
  for (const auto& col : ratios) z.ratios.push_back(mean_se(col));
  return z;
}

}  // namespace overfit::simlab
