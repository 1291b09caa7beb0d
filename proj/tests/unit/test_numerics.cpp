#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "overfit/error.hpp"
#include "overfit/numerics/fixed_point.hpp"
#include "overfit/numerics/lambert_w.hpp"
#include "overfit/numerics/quadrature.hpp"
#include "overfit/numerics/rng.hpp"
#include "overfit/numerics/scalar_solvers.hpp"

using namespace overfit;
using namespace overfit::numerics;

namespace {

double bisect(auto f, double lo, double hi, double tol = 1e-14) {
  double flo = f(lo);
  while (hi - lo > tol * (1.0 + std::abs(lo))) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Golden-section search carried out in long double so that the flat
// objective near its minimum still resolves the argmin to about 1e-10.
long double golden_section(auto f, long double lo, long double hi, long double tol = 1e-12L) {
  const long double r = (std::sqrt(5.0L) - 1.0L) / 2.0L;
  long double c = hi - r * (hi - lo), d = lo + r * (hi - lo);
  long double fc = f(c), fd = f(d);
  while (hi - lo > tol) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - r * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + r * (hi - lo);
      fd = f(d);
    }
  }
  return 0.5 * (lo + hi);
}

long double gumbel_value(long double xi) { return xi + std::exp(-xi); }

long double logistic_value(long double xi) {
  const long double a = std::abs(xi);
  return a + 2.0L * std::log1p(std::exp(-a));
}

Jet gumbel_h(double xi) { return {xi + std::exp(-xi), 1.0 - std::exp(-xi), std::exp(-xi)}; }

Jet logistic_h(double xi) {
  const double a = std::abs(xi);
  const double th = std::tanh(0.5 * xi);
  return {a + 2.0 * std::log1p(std::exp(-a)), th, 0.5 * (1.0 - th * th)};
}

}  // namespace

TEST_CASE("lambert_w0 trivial values and domain") {
  CHECK(lambert_w0(0.0) == 0.0);
  CHECK(lambert_w0(std::numbers::e) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(lambert_w0(-1.0 / std::numbers::e) == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK_THROWS_AS(lambert_w0(-0.5), DomainError);
}

TEST_CASE("lambert_w0 matches a bisection oracle at 2.5") {
  const double oracle = bisect([](double w) { return w * std::exp(w) - 2.5; }, 0.0, 2.5);
  CHECK(lambert_w0(2.5) == doctest::Approx(oracle).epsilon(1e-13));
}

TEST_CASE("lambert_w0 round trip over 1000 log-spaced points") {
  const double lo = -1.0 / std::numbers::e + 1e-6;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    // Log-spaced in the distance from the branch point.
    const double s = std::exp(std::log(1e-6) + (std::log(1e6 - lo) - std::log(1e-6)) * i / 999.0);
    const double x = -1.0 / std::numbers::e + s;
    const double w = lambert_w0(x);
    CHECK(w >= -1.0);
    worst = std::max(worst, std::abs(w * std::exp(w) - x) / std::max(1.0, std::abs(x)));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("lambert_w0_exp agrees with lambert_w0 and extends past overflow") {
  for (double L : {-5.0, 0.0, 3.0, 19.0, 25.0, 100.0}) {
    const double w = lambert_w0_exp(L);
    CHECK(w + std::log(w) == doctest::Approx(L).epsilon(1e-13));
    if (L < 700) CHECK(w == doctest::Approx(lambert_w0(std::exp(L))).epsilon(1e-13));
  }
  const double w = lambert_w0_exp(2000.0);
  CHECK(std::isfinite(w));
  CHECK(w + std::log(w) == doctest::Approx(2000.0).epsilon(1e-14));
}

TEST_CASE("gauss_rule small orders") {
  const auto h2 = gauss_rule(RuleKind::Hermite, 2);
  REQUIRE(h2.nodes.size() == 2);
  CHECK(h2.nodes[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(h2.nodes[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(h2.weights[0] == doctest::Approx(0.5).epsilon(1e-15));
  const auto l1 = gauss_rule(RuleKind::Legendre, 1);
  CHECK(l1.nodes[0] == doctest::Approx(0.5));
  CHECK(l1.weights[0] == doctest::Approx(1.0));
  const auto g5 = gauss_rule(RuleKind::Laguerre, 5);
  CHECK(std::abs(g5.integrate([](double x) { return x * x; }) - 2.0) <= 1e-10);
  CHECK_THROWS_AS(gauss_rule(RuleKind::Hermite, 0), DomainError);
  CHECK_THROWS_AS(gauss_rule(RuleKind::Hermite, kMaxRuleOrder + 1), DomainError);
}

TEST_CASE("gauss_rule moment invariants across orders") {
  for (int n : {8, 16, 32, 64, 128, 256}) {
    CAPTURE(n);
    const auto h = gauss_rule(RuleKind::Hermite, n);
    CHECK(h.nodes.size() == static_cast<std::size_t>(n));
    CHECK(std::abs(h.integrate([](double) { return 1.0; }) - 1.0) <= 1e-12);
    CHECK(std::abs(h.integrate([](double x) { return x; })) <= 1e-10);
    CHECK(std::abs(h.integrate([](double x) { return x * x; }) - 1.0) <= 1e-10);
    CHECK(std::abs(h.integrate([](double x) { return x * x * x; })) <= 1e-10);
    CHECK(std::abs(h.integrate([](double x) { return std::pow(x, 4); }) - 3.0) <= 1e-10);

    const auto g = gauss_rule(RuleKind::Laguerre, n);
    CHECK(std::abs(g.integrate([](double) { return 1.0; }) - 1.0) <= 1e-10);
    CHECK(std::abs(g.integrate([](double x) { return x; }) - 1.0) <= 1e-10);
    CHECK(std::abs(g.integrate([](double x) { return x * x * x; }) - 6.0) <= 1e-9);

    const auto l = gauss_rule(RuleKind::Legendre, n);
    CHECK(std::abs(l.integrate([](double) { return 1.0; }) - 1.0) <= 1e-12);
    CHECK(std::abs(l.integrate([](double x) { return x; }) - 0.5) <= 1e-12);
    CHECK(std::abs(l.integrate([](double x) { return std::pow(x, 5); }) - 1.0 / 6.0) <= 1e-12);
  }
}

TEST_CASE("gauss_rule is deterministic") {
  const auto a = gauss_rule(RuleKind::Laguerre, 64);
  const auto b = gauss_rule(RuleKind::Laguerre, 64);
  CHECK(a.nodes == b.nodes);
  CHECK(a.weights == b.weights);
}

TEST_CASE("solve_a_minus_b_tanh") {
  CHECK(solve_a_minus_b_tanh(0.0, 3.0) == 0.0);
  CHECK(solve_a_minus_b_tanh(1.0, 0.0) == 1.0);
  const double oracle = bisect([](double x) { return x - 2.0 + std::tanh(x); }, 0.0, 2.0);
  CHECK(solve_a_minus_b_tanh(2.0, 1.0) == doctest::Approx(oracle).epsilon(1e-13));
  CHECK_THROWS_AS(solve_a_minus_b_tanh(1.0, -1.0), DomainError);

  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> ua(-50.0, 50.0), ub(0.0, 400.0);
  for (int i = 0; i < 2000; ++i) {
    const double a = ua(gen), b = ub(gen);
    const double x = solve_a_minus_b_tanh(a, b);
    CHECK(std::abs(x - a + b * std::tanh(x)) <= 1e-12 * (1.0 + std::abs(a)));
  }
}

TEST_CASE("solve_a_minus_b_tanh is monotone in a") {
  for (double b : {0.1, 1.0, 10.0, 1e3}) {
    double prev = -INFINITY;
    for (int i = 0; i <= 400; ++i) {
      const double a = -20.0 + 0.1 * i;
      const double x = solve_a_minus_b_tanh(a, b);
      CHECK(x >= prev);
      prev = x;
    }
  }
}

TEST_CASE("prox_minimize closed forms") {
  CHECK(prox_minimize(1.3, 1.0, [](double x) { return Jet{0.5 * x * x, x, 1.0}; }) ==
        doctest::Approx(0.65).epsilon(1e-14));
  CHECK(std::abs(prox_minimize(0.0, 2.7, logistic_h)) <= 1e-14);
  // Gaussian shrinkage nu / (1 + u^2 / s^2) for h = (xi - m)^2 / (2 s^2) centred at m = 0.
  for (double u : {0.1, 1.0, 5.0}) {
    const double s2 = 0.7;
    const double xi = prox_minimize(2.0, u, [&](double x) { return Jet{x * x / (2 * s2), x / s2, 1 / s2}; });
    CHECK(xi == doctest::Approx(2.0 / (1.0 + u * u / s2)).epsilon(1e-14));
  }
}

TEST_CASE("prox_minimize for Gumbel matches the Lambert-W form and golden section") {
  const double nu = 0.7, u = 0.5;
  const double u2 = u * u;
  const double closed = nu - u2 + lambert_w0(u2 * std::exp(u2 - nu));
  const double xi = prox_minimize(nu, u, gumbel_h);
  const double gs = static_cast<double>(golden_section(
      [&](long double x) { return 0.5L * ((x - nu) / u) * ((x - nu) / u) + gumbel_value(x); }, -10.0L, 10.0L));
  CHECK(xi == doctest::Approx(closed).epsilon(1e-13));
  CHECK(std::abs(xi - gs) <= 1e-8);
}

TEST_CASE("prox_minimize agrees with golden section on 100 random Gumbel/logistic instances") {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> unu(-5.0, 5.0), uu(0.05, 3.0);
  for (int i = 0; i < 100; ++i) {
    const double nu = unu(gen), u = uu(gen);
    for (int fam = 0; fam < 2; ++fam) {
      auto h = [&](double x) { return fam == 0 ? gumbel_h(x) : logistic_h(x); };
      const double xi = prox_minimize(nu, u, h);
      auto obj = [&](long double x) {
        const long double q = (x - nu) / u;
        return 0.5L * q * q + (fam == 0 ? gumbel_value(x) : logistic_value(x));
      };
      const double gs = static_cast<double>(golden_section(obj, -30.0L, 30.0L));
      CHECK(std::abs(xi - gs) <= 1e-8);
      CHECK(std::abs((xi - nu) / (u * u) + h(xi).d1) <= 1e-10);
    }
  }
}

TEST_CASE("prox_minimize with extreme arguments") {
  // Far left of the Gumbel density, where exp(-xi) is huge.
  const double xi = prox_minimize(-400.0, 2.0, gumbel_h);
  CHECK(std::isfinite(xi));
  CHECK(std::abs((xi + 400.0) / 4.0 + gumbel_h(xi).d1) <= 1e-8 * std::abs(gumbel_h(xi).d1));
  CHECK_THROWS_AS(prox_minimize(0.0, 0.0, gumbel_h), DomainError);
}

TEST_CASE("damped_fixed_point") {
  FixedPointConfig cfg;
  Eigen::VectorXd x0(2);
  x0 << 3.0, -1.0;
  auto id = damped_fixed_point([](const Eigen::VectorXd& x) { return x; }, x0, cfg);
  CHECK(id.converged);
  CHECK(id.iterations == 0);
  CHECK(id.x == x0);

  cfg.tol = 1e-10;
  Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  auto half = damped_fixed_point([](const Eigen::VectorXd& x) { return Eigen::VectorXd(0.5 * x); }, one, cfg);
  CHECK(half.converged);
  CHECK(std::abs(half.x(0)) <= 1e-9);

  cfg.max_iter = 3;
  auto slow = damped_fixed_point([](const Eigen::VectorXd& x) { return Eigen::VectorXd(0.5 * x); }, one, cfg);
  CHECK_FALSE(slow.converged);
  CHECK(slow.residual > 0.0);

  CHECK_THROWS_AS(damped_fixed_point([](const Eigen::VectorXd& x) { return Eigen::VectorXd(x / 0.0); }, one, {}),
                  NumericalError);
  FixedPointConfig bad;
  bad.damping = 0.0;
  CHECK_THROWS_AS(validate(bad), DomainError);
}

TEST_CASE("newton_solve on a smooth 2-d system") {
  auto f = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(2);
    r << x(0) * x(0) + x(1) * x(1) - 4.0, std::exp(x(0)) - x(1);
    return r;
  };
  Eigen::VectorXd x0(2);
  x0 << -1.0, 1.0;
  auto res = newton_solve(f, x0);
  CHECK(res.converged);
  CHECK(f(res.x).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("counter rng is reproducible and seeds split") {
  CounterRng a(123), b(123), c(124);
  for (int i = 0; i < 10; ++i) {
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
  }
  CHECK(derive_seed(5, 0) != derive_seed(5, 1));
  CounterRng r(9);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = standard_normal(r);
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
  double g = 0.0;
  for (int i = 0; i < n; ++i) g += gamma_draw(r, 2.0, 0.5);
  CHECK(std::abs(g / n - 1.0) < 0.01);
}
