#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>

#include "overfit/models/model.hpp"
#include "overfit/numerics/rng.hpp"

namespace overfit::models {

/// Covariance of the covariate rows: identity when `matrix` is empty.
struct Covariance {
  std::optional<Eigen::MatrixXd> matrix;

  bool is_identity() const { return !matrix.has_value(); }
};

struct Dataset {
  Eigen::MatrixXd X;  // N x p
  Eigen::VectorXd T;  // length N, positive
  double zeta = 0.0;  // p / N
  std::uint64_t seed = 0;
  Covariance covariance;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
};

/// Throws DomainError unless N > p >= 1, sizes agree and all T are positive.
void validate(const Dataset& d);

/// Symmetric square root of a symmetric positive-definite matrix by
/// eigendecomposition. Throws DomainError if A is not symmetric PD.
Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& A);

/// Draws X with i.i.d. N(0, A) rows, then T_i from the family density at
/// linear predictor X_i' beta. The stream of draws is: all N*p standard
/// normals for X (row by row), then the per-row response draws.
Dataset sample_dataset(const ModelSpec& spec, Eigen::Index N, Eigen::Index p, std::uint64_t seed,
                       const Covariance& covariance = {});

/// One response draw given the linear predictor.
double sample_response(const ModelSpec& spec, double lp, numerics::CounterRng& rng);

/// p i.i.d. N(0, scale^2) components; scale = 0 gives the zero vector.
Eigen::VectorXd sample_beta0(Eigen::Index p, double scale, std::uint64_t seed);

}  // namespace overfit::models
