#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "overfit/error.hpp"
#include "overfit/models/dataset.hpp"
#include "overfit/models/io.hpp"
#include "overfit/models/model.hpp"
#include "overfit/models/noise.hpp"

using namespace overfit;
using namespace overfit::models;

namespace {

// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return d;
}

// Critical value at alpha = 0.01.
double ks_critical(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

// Trapezoid rule in y = log t; integrand decays doubly exponentially or
// exponentially in y, so a wide uniform grid is spectrally accurate.
double integrate_density(Family f, double lp, const Nuisance& nu) {
  const double lo = -80.0, hi = 80.0;
  const int n = 40000;
  const double h = (hi - lo) / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double y = lo + i * h;
    const double t = std::exp(y);
    const double v = std::exp(log_density(f, t, lp, nu) + y);
    acc += (i == 0 || i == n ? 0.5 : 1.0) * v;
  }
  return acc * h;
}

std::vector<Nuisance> nuisance_grid(Family f) {
  std::vector<Nuisance> out;
  for (double lambda : {0.3, 1.0, 2.5}) {
    if (f == Family::ExpGammaFrailty) {
      for (double theta : {0.0, 0.05, 0.5, 1.0, 3.0}) out.push_back({lambda, 1.0, theta});
    } else {
      for (double rho : {0.5, 1.0, 2.0}) out.push_back({lambda, rho, 0.0});
    }
  }
  return out;
}

constexpr Family kFamilies[] = {Family::WeibullPH, Family::LogLogisticAFT, Family::ExpGammaFrailty};

}  // namespace

TEST_CASE("density reference values") {
  CHECK(density(Family::WeibullPH, 1.0, 0.0, {1.0, 1.0, 0.0}) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(density(Family::ExpGammaFrailty, 1.0, 0.0, {1.0, 1.0, 0.0}) == doctest::Approx(std::exp(-1.0)));
  CHECK(density(Family::ExpGammaFrailty, 1.0, 0.0, {1.0, 1.0, 1e-12}) == doctest::Approx(std::exp(-1.0)));
  for (double rho : {0.5, 1.0, 3.0}) {
    const double lambda = 1.7, lp = 0.4;
    const double t = lambda * std::exp(-lp);
    CHECK(density(Family::LogLogisticAFT, t, lp, {lambda, rho, 0.0}) == doctest::Approx(rho / (4 * t)));
  }
  CHECK_THROWS_AS(density(Family::WeibullPH, 0.0, 0.0, {}), DomainError);
  CHECK_THROWS_AS(density(Family::WeibullPH, 1.0, 0.0, {1.0, -1.0, 0.0}), DomainError);
  CHECK_THROWS_AS(density(Family::ExpGammaFrailty, 1.0, 0.0, {1.0, 1.0, -0.1}), DomainError);
}

TEST_CASE("densities integrate to one") {
  for (Family f : kFamilies) {
    for (const Nuisance& nu : nuisance_grid(f)) {
      for (double lp : {-1.0, 0.0, 1.5}) {
        CAPTURE(to_string(f));
        CAPTURE(nu.lambda);
        CAPTURE(nu.rho);
        CAPTURE(nu.theta);
        CHECK(std::abs(integrate_density(f, lp, nu) - 1.0) <= 1e-6);
      }
    }
  }
}

TEST_CASE("density gradients agree with central differences") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> ulp(-1.5, 1.5), ulogt(-3.0, 3.0), upos(0.3, 2.5), uth(0.0, 2.0);
  const double h = 1e-6;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
  for (Family f : kFamilies) {
    for (int i = 0; i < 100; ++i) {
      const double t = std::exp(ulogt(gen)), lp = ulp(gen);
      Nuisance nu{upos(gen), upos(gen), uth(gen)};
      const double d_lp = (log_density(f, t, lp + h, nu) - log_density(f, t, lp - h, nu)) / (2 * h);
      CHECK(rel(dlogdensity_dlinpred(f, t, lp, nu), d_lp) <= 1e-5);
      const NuisanceGradient g = dlogdensity_dnuisance(f, t, lp, nu);
      Nuisance a = nu, b = nu;
      a.lambda += h;
      b.lambda -= h;
      CHECK(rel(g.d_lambda, (log_density(f, t, lp, a) - log_density(f, t, lp, b)) / (2 * h)) <= 1e-5);
      a = nu;
      b = nu;
      if (f == Family::ExpGammaFrailty) {
        a.theta += h;
        b.theta -= h;
        CHECK(rel(g.d_theta, (log_density(f, t, lp, a) - log_density(f, t, lp, b)) / (2 * h)) <= 1e-5);
      } else {
        a.rho += h;
        b.rho -= h;
        CHECK(rel(g.d_rho, (log_density(f, t, lp, a) - log_density(f, t, lp, b)) / (2 * h)) <= 1e-5);
      }
    }
  }
}

TEST_CASE("frailty terms: derivatives and the theta -> 0 limit") {
  const double h = 1e-6;
  for (double theta : {1e-9, 0.01, 0.3, 1.0, 4.0}) {
    for (double r : {-30.0, -5.0, -1.0, 0.0, 0.7, 3.0, 12.0}) {
      CAPTURE(theta);
      CAPTURE(r);
      const FrailtyTerms f = frailty_terms(r, theta);
      const FrailtyTerms rp = frailty_terms(r + h, theta), rm = frailty_terms(r - h, theta);
      const double ht = std::max(theta * 1e-5, 1e-9);
      const FrailtyTerms tp = frailty_terms(r, theta + ht), tm = frailty_terms(r, std::max(0.0, theta - ht));
      const double dt = theta + ht - std::max(0.0, theta - ht);
      auto close = [](double a, double b) { return std::abs(a - b) <= 1e-5 * std::max(1.0, std::abs(b)); };
      CHECK(close(f.h_r, (rp.h - rm.h) / (2 * h)));
      CHECK(close(f.h_rr, (rp.h_r - rm.h_r) / (2 * h)));
      CHECK(close(f.h_rt, (rp.h_t - rm.h_t) / (2 * h)));
      if (r > -20.0) {
        CHECK(close(f.h_t, (tp.h - tm.h) / dt));
        CHECK(close(f.h_tt, (tp.h_t - tm.h_t) / dt));
      }
    }
  }
  for (double r : {-3.0, 0.0, 2.0}) {
    const FrailtyTerms a = frailty_terms(r, 0.0), b = frailty_terms(r, 1e-12);
    CHECK(a.h == doctest::Approx(b.h).epsilon(1e-10));
    CHECK(a.h_t == doctest::Approx(b.h_t).epsilon(1e-8));
    CHECK(a.h_tt == doctest::Approx(b.h_tt).epsilon(1e-8));
  }
  // Far left tail stays finite.
  const FrailtyTerms far = frailty_terms(-800.0, 0.5);
  CHECK(std::isfinite(far.h));
  CHECK(std::isfinite(far.h_r));
  CHECK(std::isfinite(far.h_rr));
}

TEST_CASE("noise negative log density and score") {
  const double h = 1e-6;
  for (Noise n : {Noise::Gumbel, Noise::Logistic, Noise::GammaFrailty, Noise::Gaussian}) {
    NoiseParams p{0.3, 1.7, 0.6};
    for (double z : {-3.0, -0.4, 0.0, 1.1, 4.0}) {
      const auto j = neg_log_noise(n, p, z);
      CHECK(j.d1 == doctest::Approx((neg_log_noise(n, p, z + h).value - neg_log_noise(n, p, z - h).value) / (2 * h))
                        .epsilon(1e-6));
      const auto s = noise_score(n, p, z);
      NoiseParams a = p, b = p;
      a.phi += h;
      b.phi -= h;
      CHECK(s[0] == doctest::Approx(-(neg_log_noise(n, a, z).value - neg_log_noise(n, b, z).value) / (2 * h))
                        .epsilon(1e-6));
      a = p;
      b = p;
      a.set_shape(n, p.shape(n) + h);
      b.set_shape(n, p.shape(n) - h);
      CHECK(s[1] == doctest::Approx(-(neg_log_noise(n, a, z).value - neg_log_noise(n, b, z).value) / (2 * h))
                        .epsilon(1e-6));
    }
  }
}

TEST_CASE("noise samplers match their CDFs") {
  numerics::CounterRng rng(11);
  for (Noise n : {Noise::Gumbel, Noise::Logistic, Noise::GammaFrailty, Noise::Gaussian}) {
    NoiseParams p{-0.5, 2.0, 0.5};
    std::vector<double> xs(20000);
    for (auto& x : xs) x = sample_noise(n, p, rng);
    CHECK(ks_statistic(xs, [&](double z) { return noise_cdf(n, p, z); }) < ks_critical(xs.size()));
  }
}

TEST_CASE("log-linear maps") {
  Eigen::VectorXd beta(3);
  beta << 0.1, -0.2, 0.3;
  ModelSpec w{Family::WeibullPH, beta, {1.0 / 3.0, 0.5, 0.0}};
  LogLinearForm f = to_log_linear(w);
  CHECK(f.phi == doctest::Approx(-std::log(3.0)).epsilon(1e-15));
  CHECK(f.sigma == doctest::Approx(2.0).epsilon(1e-15));
  CHECK((f.varphi - 2.0 * beta).norm() <= 1e-15);

  ModelSpec ll{Family::LogLogisticAFT, beta, {1.0, 1.0, 0.0}};
  f = to_log_linear(ll);
  CHECK(f.phi == 0.0);
  CHECK(f.sigma == 1.0);
  CHECK(f.varphi == beta);

  ModelSpec fr{Family::ExpGammaFrailty, beta, {2.0, 1.0, 0.5}};
  f = to_log_linear(fr);
  CHECK(f.phi == doctest::Approx(std::log(2.0)));
  CHECK(f.theta == 0.5);
  CHECK(f.varphi == beta);

  for (const ModelSpec& s : {w, ll, fr, ModelSpec{Family::LogLogisticAFT, beta, {0.2, 3.0, 0.0}}}) {
    const ModelSpec back = from_log_linear(s.family, to_log_linear(s));
    CHECK((back.beta - s.beta).norm() <= 1e-12);
    CHECK(back.nuisance.lambda == doctest::Approx(s.nuisance.lambda).epsilon(1e-12));
    if (s.family == Family::ExpGammaFrailty) {
      CHECK(back.nuisance.theta == doctest::Approx(s.nuisance.theta).epsilon(1e-12));
    } else {
      CHECK(back.nuisance.rho == doctest::Approx(s.nuisance.rho).epsilon(1e-12));
    }
  }
}

TEST_CASE("Weibull with unit parameters and zero signal samples Exp(1)") {
  ModelSpec s{Family::WeibullPH, Eigen::VectorXd::Zero(1), {1.0, 1.0, 0.0}};
  const Dataset d = sample_dataset(s, 100000, 1, 5);
  CHECK(std::abs(d.T.mean() - 1.0) < 0.01);
  CHECK(d.zeta == doctest::Approx(1e-5));
}

TEST_CASE("native samplers pass a KS test at fixed linear predictor") {
  for (Family f : kFamilies) {
    const Nuisance nu = f == Family::ExpGammaFrailty ? Nuisance{1.5, 1.0, 0.5} : Nuisance{1.0 / 3.0, 0.5, 0.0};
    ModelSpec s{f, Eigen::VectorXd::Zero(1), nu};
    const double lp = 0.37;
    numerics::CounterRng rng(77);
    std::vector<double> ts(20000);
    for (auto& t : ts) t = sample_response(s, lp, rng);
    const LogLinearForm ll = to_log_linear({f, Eigen::VectorXd::Ones(1) * lp, nu});
    NoiseParams np{ll.phi, ll.sigma, ll.theta};
    // P(T <= t) = P(Z >= -log t - X'varphi).
    const double shift = ll.varphi(0);
    auto cdf = [&](double t) { return 1.0 - noise_cdf(noise_of(f), np, -std::log(t) - shift); };
    CAPTURE(to_string(f));
    CHECK(ks_statistic(ts, cdf) < ks_critical(ts.size()));
  }
}

TEST_CASE("log transform residuals follow the noise law") {
  for (Family f : kFamilies) {
    const Nuisance nu = f == Family::ExpGammaFrailty ? Nuisance{2.0, 1.0, 0.5} : Nuisance{0.7, 1.6, 0.0};
    ModelSpec s{f, sample_beta0(4, 0.5, 9), nu};
    const Dataset d = sample_dataset(s, 100000, 4, 21);
    const LogLinearForm ll = to_log_linear(s);
    const Eigen::VectorXd z = -d.T.array().log().matrix() - d.X * ll.varphi;
    std::vector<double> zs(z.data(), z.data() + z.size());
    NoiseParams np{ll.phi, ll.sigma, ll.theta};
    CAPTURE(to_string(f));
    CHECK(ks_statistic(zs, [&](double v) { return noise_cdf(noise_of(f), np, v); }) < ks_critical(zs.size()));
  }
}

TEST_CASE("identity covariates have unit moments") {
  ModelSpec s{Family::WeibullPH, Eigen::VectorXd::Zero(3), {1.0, 1.0, 0.0}};
  const Dataset d = sample_dataset(s, 50000, 3, 2);
  for (Eigen::Index k = 0; k < 3; ++k) {
    const double m = d.X.col(k).mean();
    const double v = (d.X.col(k).array() - m).square().mean();
    CHECK(std::abs(m) < 0.02);
    CHECK(std::abs(v - 1.0) < 0.03);
  }
}

TEST_CASE("correlated covariates reproduce A") {
  Eigen::MatrixXd A(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) A(i, j) = std::pow(0.6, std::abs(i - j));
  const Eigen::MatrixXd R = symmetric_sqrt(A);
  CHECK((R - R.transpose()).norm() <= 1e-12);
  CHECK((R * R - A).norm() <= 1e-12);
  ModelSpec s{Family::LogLogisticAFT, Eigen::VectorXd::Zero(5), {1.0, 1.0, 0.0}};
  const Dataset d = sample_dataset(s, 100000, 5, 8, Covariance{A});
  const Eigen::MatrixXd S = d.X.transpose() * d.X / static_cast<double>(d.n());
  CHECK((S - A).norm() < 0.05);

  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(5, 5);
  bad(4, 4) = -1.0;
  CHECK_THROWS_AS(sample_dataset(s, 100, 5, 1, Covariance{bad}), DomainError);
  Eigen::MatrixXd asym = A;
  asym(0, 1) += 0.1;
  CHECK_THROWS_AS(symmetric_sqrt(asym), DomainError);
}

TEST_CASE("sample_dataset preconditions and determinism") {
  ModelSpec s{Family::WeibullPH, Eigen::VectorXd::Zero(3), {1.0, 1.0, 0.0}};
  CHECK_THROWS_AS(sample_dataset(s, 3, 3, 1), DomainError);
  CHECK_THROWS_AS(sample_dataset(s, 10, 2, 1), DomainError);
  const Dataset a = sample_dataset(s, 50, 3, 99), b = sample_dataset(s, 50, 3, 99), c = sample_dataset(s, 50, 3, 98);
  CHECK(a.X == b.X);
  CHECK(a.T == b.T);
  CHECK(a.T != c.T);
}

TEST_CASE("sample_beta0") {
  CHECK(sample_beta0(1, 0.0, 1).norm() == 0.0);
  const Eigen::VectorXd b = sample_beta0(10000, 0.15, 4);
  CHECK(std::abs(b.squaredNorm() - 225.0) < 16.0);
  CHECK(sample_beta0(90, 0.15, 5) == sample_beta0(90, 0.15, 5));
  CHECK_THROWS_AS(sample_beta0(0, 1.0, 1), DomainError);
}

TEST_CASE("dataset CSV round trip is exact") {
  ModelSpec s{Family::ExpGammaFrailty, sample_beta0(2, 0.3, 1), {1.2, 1.0, 0.5}};
  const Dataset d = sample_dataset(s, 40, 2, 17);
  std::stringstream ss;
  write_dataset_csv(ss, d);
  const std::string text = ss.str();
  CHECK(text.rfind("t,x1,x2\n", 0) == 0);
  const Dataset back = read_dataset_csv(ss);
  CHECK(back.X == d.X);
  CHECK(back.T == d.T);
  CHECK(back.zeta == doctest::Approx(2.0 / 40.0));

  std::stringstream bad("t,x1\n1.0,abc\n");
  CHECK_THROWS_AS(read_dataset_csv(bad), ConfigError);
  std::stringstream neg("t,x1\n-1.0,0.5\n2.0,1.0\n3.0,0.1\n");
  CHECK_THROWS_AS(read_dataset_csv(neg), ConfigError);
}

TEST_CASE("model spec JSON round trip") {
  ModelSpec s{Family::WeibullPH, sample_beta0(3, 0.15, 2), {1.0 / 3.0, 0.5, 0.0}};
  const auto j = to_json(s);
  const ModelSpec back = model_spec_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.family == s.family);
  CHECK(back.beta == s.beta);
  CHECK(back.nuisance.rho == s.nuisance.rho);
  nlohmann::json extra = j;
  extra["bogus"] = 1;
  CHECK_THROWS_AS(model_spec_from_json(extra), ConfigError);
  CHECK_THROWS_AS(family_from_string("cox"), ConfigError);
}
