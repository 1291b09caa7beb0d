#pragma once

#include <Eigen/Core>
#include <functional>
#include <json.hpp>
#include <optional>
#include <string>

#include "overfit/models/dataset.hpp"
#include "overfit/models/model.hpp"
#include "overfit/models/noise.hpp"

namespace overfit::mle {

/// Parameters of the log-linear model Y = X' varphi + Z, Z ~ p_Z(phi, shape),
/// where shape is sigma for location-scale noise and theta for frailty.
struct LogLinearParams {
  Eigen::VectorXd varphi;
  double phi = 0.0;
  double shape = 1.0;

  /// Packed as [varphi, phi, shape].
  Eigen::VectorXd pack() const;
  static LogLinearParams unpack(const Eigen::VectorXd& v);
};

/// Hessian of the log-likelihood as a matrix-vector product. With
/// z_i = (x_i, 1) and the packed parameter (a, s) it has the form
///   [ sum A_i z_i z_i'   sum B_i z_i ]
///   [ sum B_i z_i'       sum C_i     ]
/// and is applied in O(Np) without forming the matrix. Holds a pointer to
/// the covariate matrix, which must outlive this object.
class HessianAction {
 public:
  HessianAction() = default;
  HessianAction(const Eigen::MatrixXd* X, Eigen::VectorXd A, Eigen::VectorXd B, double C)
      : X_(X), A_(std::move(A)), B_(std::move(B)), C_(C) {}

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd dense() const;
  Eigen::Index size() const { return X_ ? X_->cols() + 2 : 0; }

 private:
  const Eigen::MatrixXd* X_ = nullptr;
  Eigen::VectorXd A_, B_;
  double C_ = 0.0;
};

struct LoglikEval {
  double value = 0.0;
  Eigen::VectorXd grad;  // packed like LogLinearParams
  HessianAction hess;
};

/// Log-likelihood of y = -log T under the log-linear model, summed over rows.
/// Throws DomainError when the shape parameter is out of range.
LoglikEval loglik_grad_hess(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, models::Noise noise,
                            const LogLinearParams& params);
LoglikEval loglik_grad_hess(const models::Dataset& d, models::Family family, const LogLinearParams& params);

struct FitOptions {
  int max_iter = 500;
  double grad_tol = 1e-8;      // on ||grad||_inf / N
  double beta_bound = 1e4;     // ||varphi||_inf above this is reported as divergence
  bool fix_shape = false;      // keep sigma (or theta) at the starting value
  std::optional<LogLinearParams> start;
  /// Called with the log-likelihood of the start and of every accepted iterate.
  std::function<void(double)> trace;
};

struct MLEstimate {
  models::Family family = models::Family::WeibullPH;
  models::Noise noise = models::Noise::Gumbel;
  Eigen::Index n_obs = 0;            // N of the fitted data set
  Eigen::VectorXd beta_hat;          // varphi on the log-linear scale
  models::NoiseParams nuisance_hat;  // phi and sigma or theta
  double loglik = 0.0;
  double grad_norm = 0.0;            // ||grad||_inf in (varphi, phi, shape)
  int iterations = 0;
  bool converged = false;
  std::string message;

  /// p/N of the fitted data set; throws DomainError unless N > p.
  double zeta() const;

  /// Estimate mapped back to the native parameterisation of the family.
  models::ModelSpec native() const;
};

/// Newton's method with backtracking line search. Location-scale noise is
/// optimised in the natural parameters (varphi/sigma, phi/sigma, 1/sigma),
/// where the negative log-likelihood is jointly convex; frailty noise is
/// optimised in (varphi, phi, theta) with theta projected onto [0, inf).
MLEstimate fit_loglinear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, models::Noise noise,
                         const FitOptions& opts = {});
MLEstimate fit(const models::Dataset& d, models::Family family, const FitOptions& opts = {});

/// Method-of-moments starting point with varphi = 0.
LogLinearParams moment_start(const Eigen::VectorXd& y, Eigen::Index p, models::Noise noise);

nlohmann::json to_json(const MLEstimate& est);
MLEstimate estimate_from_json(const nlohmann::json& j);

}  // namespace overfit::mle
