#include <Eigen/Cholesky>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>

#include "overfit/error.hpp"
#include "overfit/mle/mle.hpp"
#include "overfit/numerics/scalar_solvers.hpp"

namespace overfit::mle {

using models::Noise;

namespace {

struct Objective {
  double f;
  Eigen::VectorXd g;
  Eigen::MatrixXd H;
};

// Objective evaluators return nullopt outside their domain.
using FullFn = std::function<std::optional<Objective>(const Eigen::VectorXd&)>;
using ValueFn = std::function<std::optional<double>(const Eigen::VectorXd&)>;
using StopFn = std::function<bool(const Eigen::VectorXd&)>;

struct NewtonOutcome {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false;
  std::string message;
};

// Projected gradient for the bound x(b) >= 0 (b < 0 means no bound).
Eigen::VectorXd projected_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& g, Eigen::Index b) {
  Eigen::VectorXd pg = g;
  if (b >= 0 && x(b) <= 0.0 && g(b) > 0.0) pg(b) = 0.0;
  return pg;
}

// Search direction from the Newton system on the free variables, with
// Levenberg damping when the Hessian is not positive definite and a
// steepest-descent fallback.
Eigen::VectorXd newton_direction(const Objective& ob, const Eigen::VectorXd& x, Eigen::Index b) {
  const Eigen::Index n = x.size();
  std::vector<Eigen::Index> free;
  for (Eigen::Index k = 0; k < n; ++k)
    if (!(k == b && x(b) <= 0.0 && ob.g(b) > 0.0)) free.push_back(k);
  const Eigen::Index m = static_cast<Eigen::Index>(free.size());
  Eigen::MatrixXd Hf(m, m);
  Eigen::VectorXd gf(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    gf(i) = ob.g(free[i]);
    for (Eigen::Index j = 0; j < m; ++j) Hf(i, j) = ob.H(free[i], free[j]);
  }
  const double diag_scale = std::max(1e-300, Hf.diagonal().cwiseAbs().maxCoeff());
  double mu = 0.0;
  Eigen::VectorXd df;
  for (int attempt = 0; attempt < 30; ++attempt) {
    Eigen::MatrixXd Hm = Hf;
    Hm.diagonal().array() += mu;
    Eigen::LLT<Eigen::MatrixXd> llt(Hm);
    if (llt.info() == Eigen::Success) {
      df = -llt.solve(gf);
      if (df.allFinite() && df.dot(gf) < 0.0) break;
    }
    df.resize(0);
    mu = mu == 0.0 ? 1e-10 * diag_scale : mu * 10.0;
  }
  if (df.size() == 0) df = -gf / diag_scale;
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) d(free[i]) = df(i);
  return d;
}

NewtonOutcome bounded_newton(const FullFn& full, const ValueFn& value, Eigen::VectorXd x, Eigen::Index bound,
                             double tol, int max_iter, const StopFn& diverged,
                             const std::function<void(double)>& trace) {
  NewtonOutcome out;
  auto ob = full(x);
  if (!ob) throw DomainError("fit: starting point outside the parameter domain");
  if (trace) trace(-ob->f);
  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it;
    const Eigen::VectorXd pg = projected_gradient(x, ob->g, bound);
    if (pg.lpNorm<Eigen::Infinity>() <= tol) {
      out.x = x;
      out.converged = true;
      out.message = "gradient tolerance reached";
      return out;
    }
    const Eigen::VectorXd d = newton_direction(*ob, x, bound);
    double alpha = 1.0;
    bool accepted = false;
    // When the predicted decrease is below the rounding level of f, the
    // objective cannot rank the iterates; take the full step if f does not
    // rise beyond rounding and the projected gradient shrinks.
    const bool flat = std::abs(ob->g.dot(d)) <= 1e-13 * (1.0 + std::abs(ob->f));
    if (flat) {
      Eigen::VectorXd xn = x + d;
      if (bound >= 0) xn(bound) = std::max(0.0, xn(bound));
      auto next = full(xn);
      if (next && next->f <= ob->f + 1e-13 * (1.0 + std::abs(ob->f)) &&
          projected_gradient(xn, next->g, bound).lpNorm<Eigen::Infinity>() < pg.lpNorm<Eigen::Infinity>()) {
        x = std::move(xn);
        ob = std::move(next);
        accepted = true;
        if (trace) trace(-ob->f);
      }
    }
    for (int ls = 0; !accepted && !flat && ls < 60; ++ls, alpha *= 0.5) {
      Eigen::VectorXd xn = x + alpha * d;
      if (bound >= 0) xn(bound) = std::max(0.0, xn(bound));
      if (xn == x) break;
      const auto fn = value(xn);
      if (!fn) continue;
      const double decrease = ob->g.dot(xn - x);
      if (*fn <= ob->f + 1e-4 * decrease && *fn <= ob->f) {
        auto next = full(xn);
        if (!next) continue;
        x = std::move(xn);
        ob = std::move(next);
        accepted = true;
        if (trace) trace(-ob->f);
        break;
      }
    }
    if (diverged(x)) {
      out.x = x;
      out.iterations = it + 1;
      out.message = "divergence: regression coefficients exceeded the bound (zeta too close to 1?)";
      return out;
    }
    if (!accepted) {
      out.x = x;
      out.iterations = it + 1;
      // No decrease is representable: accept if the gradient is within the
      // stationarity guarantee, otherwise report failure.
      out.converged = pg.lpNorm<Eigen::Infinity>() <= 100.0 * tol;
      out.message = out.converged ? "stalled at numerical precision" : "line search failed";
      return out;
    }
  }
  out.x = x;
  out.iterations = max_iter;
  const Eigen::VectorXd pg = projected_gradient(x, ob->g, bound);
  out.converged = pg.lpNorm<Eigen::Infinity>() <= tol;
  out.message = out.converged ? "gradient tolerance reached" : "iteration limit reached";
  return out;
}

// Starting theta for frailty noise: the variance of log U beyond the Gumbel
// part, inverted through the trigamma function.
double frailty_theta_from_excess(double excess) {
  if (excess <= 1e-3) return 0.0;
  // trigamma(k) = excess, trigamma decreasing on (0, inf).
  auto f = [&](double log_k) { return boost::math::trigamma(std::exp(log_k)) - excess; };
  const double log_k = numerics::bracketed_root(f, -20.0, 20.0, 1e-12);
  return std::exp(-log_k);
}

}  // namespace

LogLinearParams moment_start(const Eigen::VectorXd& y, Eigen::Index p, Noise noise) {
  const double n = static_cast<double>(y.size());
  const double mean = y.mean();
  const double var = std::max((y.array() - mean).square().sum() / std::max(1.0, n - 1.0), 1e-12);
  const double sd = std::sqrt(var);
  constexpr double pi = std::numbers::pi;
  constexpr double euler = std::numbers::egamma;
  LogLinearParams s{Eigen::VectorXd::Zero(p), 0.0, 1.0};
  switch (noise) {
    case Noise::Gumbel:
      s.shape = sd * std::sqrt(6.0) / pi;
      s.phi = mean - euler * s.shape;
      break;
    case Noise::Logistic:
      s.shape = sd * std::sqrt(3.0) / pi;
      s.phi = mean;
      break;
    case Noise::Gaussian:
      s.shape = sd;
      s.phi = mean;
      break;
    case Noise::GammaFrailty: {
      s.shape = frailty_theta_from_excess(var - pi * pi / 6.0);
      const double mean_log_u =
          s.shape > 0.0 ? boost::math::digamma(1.0 / s.shape) + std::log(s.shape) : 0.0;
      s.phi = mean - euler - mean_log_u;
      break;
    }
  }
  return s;
}

MLEstimate fit_loglinear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Noise noise, const FitOptions& opts) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (p < 1 || n <= p) throw DomainError("fit: need N > p >= 1");
  if (y.size() != n || !y.allFinite() || !X.allFinite()) throw DomainError("fit: bad data");
  if (opts.max_iter < 1 || !(opts.grad_tol > 0.0)) throw DomainError("fit: bad options");

  LogLinearParams start = opts.start ? *opts.start : moment_start(y, p, noise);
  if (start.varphi.size() != p) throw DomainError("fit: start has wrong dimension");
  models::validate(noise, {start.phi, start.shape, start.shape});

  const double tol = opts.grad_tol * static_cast<double>(n);
  const double fixed_shape = start.shape;
  const Eigen::Index nfree = opts.fix_shape ? p + 1 : p + 2;
  NewtonOutcome res;
  LogLinearParams fitted;

  if (models::has_scale(noise)) {
    // Natural parameters theta = (varphi/sigma, phi/sigma, 1/sigma) and
    // r_i = tau y_i - x_i' gamma - mu = -w_i' theta with w_i = (x_i, 1, -y_i).
    Eigen::MatrixXd W(n, p + 2);
    W.leftCols(p) = X;
    W.col(p).setOnes();
    W.col(p + 1) = -y;
    const double nn = static_cast<double>(n);
    auto expand = [&](const Eigen::VectorXd& th) {
      Eigen::VectorXd full(p + 2);
      full.head(p + 1) = th.head(p + 1);
      full(p + 1) = opts.fix_shape ? 1.0 / fixed_shape : th(p + 1);
      return full;
    };
    auto value = [&](const Eigen::VectorXd& th) -> std::optional<double> {
      const Eigen::VectorXd full = expand(th);
      const double tau = full(p + 1);
      if (!(tau > 0.0)) return std::nullopt;
      const Eigen::VectorXd r = -(W * full);
      double f = -nn * std::log(tau);
      for (Eigen::Index i = 0; i < n; ++i) f += models::standard_rho(noise, r(i)).value;
      if (!std::isfinite(f)) return std::nullopt;
      return f;
    };
    auto full_eval = [&](const Eigen::VectorXd& th) -> std::optional<Objective> {
      const Eigen::VectorXd full = expand(th);
      const double tau = full(p + 1);
      if (!(tau > 0.0)) return std::nullopt;
      const Eigen::VectorXd r = -(W * full);
      Eigen::VectorXd d1(n), d2(n);
      double f = -nn * std::log(tau);
      for (Eigen::Index i = 0; i < n; ++i) {
        const numerics::Jet j = models::standard_rho(noise, r(i));
        f += j.value;
        d1(i) = j.d1;
        d2(i) = j.d2;
      }
      if (!std::isfinite(f)) return std::nullopt;
      const auto Wf = W.leftCols(nfree);
      Objective ob;
      ob.f = f;
      ob.g = -(Wf.transpose() * d1);
      ob.H = Wf.transpose() * d2.asDiagonal() * Wf;
      if (!opts.fix_shape) {
        ob.g(p + 1) -= nn / tau;
        ob.H(p + 1, p + 1) += nn / (tau * tau);
      }
      return ob;
    };
    Eigen::VectorXd th0(nfree);
    th0.head(p) = start.varphi / start.shape;
    th0(p) = start.phi / start.shape;
    if (!opts.fix_shape) th0(p + 1) = 1.0 / start.shape;
    auto diverged = [&](const Eigen::VectorXd& th) {
      const double tau = expand(th)(p + 1);
      return th.head(p).lpNorm<Eigen::Infinity>() > opts.beta_bound * tau;
    };
    res = bounded_newton(full_eval, value, th0, -1, tol, opts.max_iter, diverged, opts.trace);
    const Eigen::VectorXd full = expand(res.x);
    const double tau = full(p + 1);
    fitted = {full.head(p) / tau, full(p) / tau, 1.0 / tau};
  } else {
    // Frailty: minimise the negative log-likelihood in (varphi, phi, theta >= 0).
    auto expand = [&](const Eigen::VectorXd& v) {
      Eigen::VectorXd full(p + 2);
      full.head(p + 1) = v.head(p + 1);
      full(p + 1) = opts.fix_shape ? fixed_shape : v(p + 1);
      return full;
    };
    auto value = [&](const Eigen::VectorXd& v) -> std::optional<double> {
      const Eigen::VectorXd full = expand(v);
      if (!(full(p + 1) >= 0.0)) return std::nullopt;
      const Eigen::VectorXd resid = y - X * full.head(p);
      double f = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) f += models::frailty_terms(resid(i) - full(p), full(p + 1)).h;
      if (!std::isfinite(f)) return std::nullopt;
      return f;
    };
    auto full_eval = [&](const Eigen::VectorXd& v) -> std::optional<Objective> {
      const Eigen::VectorXd full = expand(v);
      if (!(full(p + 1) >= 0.0)) return std::nullopt;
      try {
        const LoglikEval ev = loglik_grad_hess(X, y, noise, LogLinearParams::unpack(full));
        Objective ob;
        ob.f = -ev.value;
        ob.g = -ev.grad.head(nfree);
        ob.H = -ev.hess.dense().topLeftCorner(nfree, nfree);
        return ob;
      } catch (const NumericalError&) {
        return std::nullopt;
      }
    };
    Eigen::VectorXd v0(nfree);
    v0.head(p) = start.varphi;
    v0(p) = start.phi;
    if (!opts.fix_shape) v0(p + 1) = start.shape;
    auto diverged = [&](const Eigen::VectorXd& v) { return v.head(p).lpNorm<Eigen::Infinity>() > opts.beta_bound; };
    res = bounded_newton(full_eval, value, v0, opts.fix_shape ? -1 : p + 1, tol, opts.max_iter, diverged, opts.trace);
    const Eigen::VectorXd full = expand(res.x);
    fitted = LogLinearParams::unpack(full);
  }

  MLEstimate est;
  est.noise = noise;
  est.n_obs = X.rows();
  est.beta_hat = fitted.varphi;
  est.nuisance_hat = {fitted.phi, models::has_scale(noise) ? fitted.shape : 1.0,
                      models::has_scale(noise) ? 0.0 : fitted.shape};
  est.iterations = res.iterations;
  est.converged = res.converged;
  est.message = res.message;
  try {
    const LoglikEval ev = loglik_grad_hess(X, y, noise, fitted);
    est.loglik = ev.value;
    Eigen::VectorXd g = ev.grad;
    if (opts.fix_shape) g(p + 1) = 0.0;
    if (!models::has_scale(noise) && fitted.shape <= 0.0 && g(p + 1) < 0.0) g(p + 1) = 0.0;
    est.grad_norm = g.lpNorm<Eigen::Infinity>();
  } catch (const std::exception& e) {
    est.converged = false;
    est.loglik = -std::numeric_limits<double>::infinity();
    est.grad_norm = std::numeric_limits<double>::infinity();
    est.message = e.what();
  }
  if (est.converged && est.grad_norm > 1e-6 * static_cast<double>(n)) {
    est.converged = false;
    est.message = "stationarity check failed on the log-linear scale";
  }
  return est;
}

MLEstimate fit(const models::Dataset& d, models::Family family, const FitOptions& opts) {
  models::validate(d);
  const Eigen::VectorXd y = -d.T.array().log().matrix();
  MLEstimate est = fit_loglinear(d.X, y, models::noise_of(family), opts);
  est.family = family;
  return est;
}

models::ModelSpec MLEstimate::native() const {
  if (noise == Noise::Gaussian) throw DomainError("MLEstimate::native: Gaussian noise has no survival family");
  models::LogLinearForm f{beta_hat, nuisance_hat.phi, nuisance_hat.sigma, nuisance_hat.theta};
  return models::from_log_linear(family, f);
}

nlohmann::json to_json(const MLEstimate& est) {
  nlohmann::json j;
  j["family"] = std::string(models::to_string(est.family));
  j["noise"] = std::string(models::to_string(est.noise));
  j["n"] = est.n_obs;
  j["beta_hat"] = std::vector<double>(est.beta_hat.data(), est.beta_hat.data() + est.beta_hat.size());
  nlohmann::json nu;
  nu["phi"] = est.nuisance_hat.phi;
  if (models::has_scale(est.noise)) {
    nu["sigma"] = est.nuisance_hat.sigma;
  } else {
    nu["theta"] = est.nuisance_hat.theta;
  }
  j["nuisance_hat"] = nu;
  j["loglik"] = est.loglik;
  j["grad_norm"] = est.grad_norm;
  j["iterations"] = est.iterations;
  j["converged"] = est.converged;
  j["message"] = est.message;
  return j;
}

double MLEstimate::zeta() const {
  if (n_obs <= beta_hat.size()) throw DomainError("MLEstimate::zeta: needs N > p");
  return static_cast<double>(beta_hat.size()) / static_cast<double>(n_obs);
}

MLEstimate estimate_from_json(const nlohmann::json& j) {
  try {
    MLEstimate est;
    est.family = models::family_from_string(j.at("family").get<std::string>());
    est.noise = models::noise_of(est.family);
    const auto b = j.at("beta_hat").get<std::vector<double>>();
    est.beta_hat = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    est.n_obs = j.value("n", Eigen::Index{0});
    const auto& nu = j.at("nuisance_hat");
    est.nuisance_hat.phi = nu.at("phi").get<double>();
    if (models::has_scale(est.noise)) {
      est.nuisance_hat.sigma = nu.at("sigma").get<double>();
    } else {
      est.nuisance_hat.theta = nu.at("theta").get<double>();
    }
    est.loglik = j.value("loglik", 0.0);
    est.grad_norm = j.value("grad_norm", 0.0);
    est.iterations = j.value("iterations", 0);
    est.converged = j.value("converged", false);
    est.message = j.value("message", std::string());
    return est;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("estimate JSON: ") + e.what());
  }
}

}  // namespace overfit::mle
