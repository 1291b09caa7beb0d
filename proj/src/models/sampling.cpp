#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

#include "overfit/error.hpp"
#include "overfit/models/dataset.hpp"
#include "overfit/numerics/rng.hpp"

namespace overfit::models {

void validate(const Dataset& d) {
  if (d.p() < 1 || d.n() <= d.p()) throw DomainError("dataset needs N > p >= 1");
  if (d.T.size() != d.n()) throw DomainError("dataset: T length does not match X rows");
  if (!d.X.allFinite()) throw DomainError("dataset: X must be finite");
  for (Eigen::Index i = 0; i < d.T.size(); ++i)
    if (!(d.T(i) > 0.0) || !std::isfinite(d.T(i))) throw DomainError("dataset: all T must be positive");
}

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols() || A.rows() == 0) throw DomainError("covariance must be square");
  const double scale = A.cwiseAbs().maxCoeff();
  if (!A.allFinite() || (A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, scale))
    throw DomainError("covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) throw DomainError("covariance eigendecomposition failed");
  const Eigen::VectorXd ev = es.eigenvalues();
  if (ev.minCoeff() <= 1e-14 * std::max(1.0, ev.maxCoeff())) throw DomainError("covariance must be positive definite");
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

double sample_response(const ModelSpec& spec, double lp, numerics::CounterRng& rng) {
  const Nuisance& nu = spec.nuisance;
  switch (spec.family) {
    case Family::WeibullPH: {
      const double e = -std::log(numerics::uniform_open01(rng));
      return std::exp((std::log(e) - lp) / nu.rho) / nu.lambda;
    }
    case Family::LogLogisticAFT: {
      const double u = numerics::uniform_open01(rng);
      return nu.lambda * std::exp(-lp + std::log(u / (1.0 - u)) / nu.rho);
    }
    case Family::ExpGammaFrailty: {
      const double e = -std::log(numerics::uniform_open01(rng));
      const double frail = nu.theta > 0.0 ? numerics::gamma_draw(rng, 1.0 / nu.theta, nu.theta) : 1.0;
      return e / (frail * nu.lambda * std::exp(lp));
    }
  }
  throw DomainError("sample_response: unknown family");
}

Dataset sample_dataset(const ModelSpec& spec, Eigen::Index N, Eigen::Index p, std::uint64_t seed,
                       const Covariance& covariance) {
  validate(spec);
  if (p < 1 || N <= p) throw DomainError("sample_dataset: need N > p >= 1");
  if (spec.beta.size() != p) throw DomainError("sample_dataset: beta length must equal p");
  std::optional<Eigen::MatrixXd> root;
  if (covariance.matrix) {
    if (covariance.matrix->rows() != p) throw DomainError("sample_dataset: covariance must be p x p");
    root = symmetric_sqrt(*covariance.matrix);
  }

  numerics::CounterRng rng(seed);
  Dataset d;
  d.X.resize(N, p);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index k = 0; k < p; ++k) d.X(i, k) = numerics::standard_normal(rng);
  if (root) d.X = d.X * (*root);

  const Eigen::VectorXd lp = d.X * spec.beta;
  d.T.resize(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    double t = sample_response(spec, lp(i), rng);
    // Guard against underflow/overflow at extreme linear predictors.
    if (!(t > 0.0)) t = std::numeric_limits<double>::min();
    if (!std::isfinite(t)) t = std::numeric_limits<double>::max();
    d.T(i) = t;
  }
  d.zeta = static_cast<double>(p) / static_cast<double>(N);
  d.seed = seed;
  d.covariance = covariance;
  return d;
}

Eigen::VectorXd sample_beta0(Eigen::Index p, double scale, std::uint64_t seed) {
  if (p < 1) throw DomainError("sample_beta0: p must be >= 1");
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw DomainError("sample_beta0: scale must be >= 0");
  numerics::CounterRng rng(seed);
  Eigen::VectorXd b(p);
  for (Eigen::Index k = 0; k < p; ++k) b(k) = scale * numerics::standard_normal(rng);
  return b;
}

}  // namespace overfit::models
