#include <cmath>

#include "overfit/error.hpp"
#include "overfit/mle/mle.hpp"

namespace overfit::mle {

Eigen::VectorXd LogLinearParams::pack() const {
  Eigen::VectorXd v(varphi.size() + 2);
  v.head(varphi.size()) = varphi;
  v(varphi.size()) = phi;
  v(varphi.size() + 1) = shape;
  return v;
}

LogLinearParams LogLinearParams::unpack(const Eigen::VectorXd& v) {
  if (v.size() < 3) throw DomainError("LogLinearParams::unpack: vector too short");
  const Eigen::Index p = v.size() - 2;
  return {v.head(p), v(p), v(p + 1)};
}

Eigen::VectorXd HessianAction::apply(const Eigen::VectorXd& v) const {
  const Eigen::Index p = X_->cols();
  if (v.size() != p + 2) throw DomainError("HessianAction::apply: size mismatch");
  const double s = v(p + 1);
  // t_i = z_i' a with z_i = (x_i, 1).
  const Eigen::VectorXd t = (*X_) * v.head(p) + Eigen::VectorXd::Constant(X_->rows(), v(p));
  const Eigen::VectorXd w = A_.cwiseProduct(t) + s * B_;
  Eigen::VectorXd out(p + 2);
  out.head(p) = X_->transpose() * w;
  out(p) = w.sum();
  out(p + 1) = B_.dot(t) + C_ * s;
  return out;
}

Eigen::MatrixXd HessianAction::dense() const {
  const Eigen::Index n = X_->rows(), p = X_->cols();
  Eigen::MatrixXd Z(n, p + 1);
  Z.leftCols(p) = *X_;
  Z.col(p).setOnes();
  Eigen::MatrixXd H(p + 2, p + 2);
  H.topLeftCorner(p + 1, p + 1) = Z.transpose() * A_.asDiagonal() * Z;
  H.block(0, p + 1, p + 1, 1) = Z.transpose() * B_;
  H.block(p + 1, 0, 1, p + 1) = H.block(0, p + 1, p + 1, 1).transpose();
  H(p + 1, p + 1) = C_;
  return H;
}

LoglikEval loglik_grad_hess(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, models::Noise noise,
                            const LogLinearParams& params) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (y.size() != n || params.varphi.size() != p) throw DomainError("loglik_grad_hess: size mismatch");
  models::NoiseParams np{params.phi, params.shape, params.shape};
  models::validate(noise, np);

  const Eigen::VectorXd resid = y - X * params.varphi;
  Eigen::VectorXd score_a(n), A(n), B(n);
  double value = 0.0, score_s = 0.0, C = 0.0;

  if (noise == models::Noise::GammaFrailty) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const models::FrailtyTerms f = models::frailty_terms(resid(i) - params.phi, params.shape);
      value -= f.h;
      score_a(i) = f.h_r;
      score_s -= f.h_t;
      A(i) = -f.h_rr;
      B(i) = f.h_rt;
      C -= f.h_tt;
    }
  } else {
    const double sigma = params.shape;
    const double inv = 1.0 / sigma, inv2 = inv * inv, log_sigma = std::log(sigma);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = (resid(i) - params.phi) * inv;
      const numerics::Jet j = models::standard_rho(noise, r);
      value -= log_sigma + j.value;
      score_a(i) = j.d1 * inv;
      score_s += (-1.0 + r * j.d1) * inv;
      A(i) = -j.d2 * inv2;
      B(i) = -(j.d2 * r + j.d1) * inv2;
      C += (1.0 - j.d2 * r * r - 2.0 * j.d1 * r) * inv2;
    }
  }

  LoglikEval out;
  out.value = value;
  out.grad.resize(p + 2);
  out.grad.head(p) = X.transpose() * score_a;
  out.grad(p) = score_a.sum();
  out.grad(p + 1) = score_s;
  out.hess = HessianAction(&X, std::move(A), std::move(B), C);
  if (!std::isfinite(out.value) || !out.grad.allFinite()) throw NumericalError("loglik_grad_hess: non-finite value");
  return out;
}

LoglikEval loglik_grad_hess(const models::Dataset& d, models::Family family, const LogLinearParams& params) {
  const Eigen::VectorXd y = -d.T.array().log().matrix();
  // The returned HessianAction refers to d.X, which the caller owns.
  return loglik_grad_hess(d.X, y, models::noise_of(family), params);
}

}  // namespace overfit::mle
