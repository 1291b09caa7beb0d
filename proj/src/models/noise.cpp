#include "overfit/models/noise.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <numbers>

#include "overfit/error.hpp"

namespace overfit::models {

std::string_view to_string(Noise n) {
  switch (n) {
    case Noise::Gumbel: return "gumbel";
    case Noise::Logistic: return "logistic";
    case Noise::GammaFrailty: return "gamma_frailty";
    case Noise::Gaussian: return "gaussian";
  }
  return "unknown";
}

Noise noise_of(Family f) {
  switch (f) {
    case Family::WeibullPH: return Noise::Gumbel;
    case Family::LogLogisticAFT: return Noise::Logistic;
    case Family::ExpGammaFrailty: return Noise::GammaFrailty;
  }
  throw DomainError("noise_of: unknown family");
}

bool has_scale(Noise n) { return n != Noise::GammaFrailty; }

void validate(Noise n, const NoiseParams& p) {
  if (!std::isfinite(p.phi)) throw DomainError("noise location must be finite");
  if (has_scale(n)) {
    if (!(p.sigma > 0.0) || !std::isfinite(p.sigma)) throw DomainError("noise scale sigma must be positive");
  } else if (!(p.theta >= 0.0) || !std::isfinite(p.theta)) {
    throw DomainError("frailty variance theta must be non-negative");
  }
}

numerics::Jet standard_rho(Noise n, double r) {
  switch (n) {
    case Noise::Gumbel: {
      const double e = std::exp(-r);
      return {r + e, 1.0 - e, e};
    }
    case Noise::Logistic: {
      // rho(r) = 2 log(2 cosh(r/2)), written to avoid overflow.
      const double a = std::abs(r);
      const double t = std::tanh(0.5 * r);
      return {a + 2.0 * std::log1p(std::exp(-a)), t, 0.5 * (1.0 - t) * (1.0 + t)};
    }
    case Noise::Gaussian:
      return {0.5 * r * r + 0.5 * std::log(2.0 * std::numbers::pi), r, 1.0};
    case Noise::GammaFrailty:
      break;
  }
  throw DomainError("standard_rho: not a location-scale noise");
}

namespace {

// L(q) = log1p(q)/q and its first two derivatives, by series near zero.
struct LSeries {
  double l, l1, l2;
};

LSeries l_series(double q) {
  // L(q) = sum_k (-q)^k / (k + 1); differentiate term by term.
  LSeries out{0.0, 0.0, 0.0};
  double pk = 1.0;  // (-q)^k
  for (int k = 0; k < 24; ++k) {
    out.l += pk / (k + 1);
    pk *= -q;
  }
  double pk1 = -1.0;  // (-1)^k q^(k-1) for k = 1
  for (int k = 1; k < 24; ++k) {
    out.l1 += k * pk1 / (k + 1);
    pk1 *= -q;
  }
  double pk2 = 1.0;  // (-1)^k q^(k-2) for k = 2
  for (int k = 2; k < 24; ++k) {
    out.l2 += k * (k - 1) * pk2 / (k + 1);
    pk2 *= -q;
  }
  return out;
}

}  // namespace

FrailtyTerms frailty_terms(double r, double theta) {
  if (!(theta >= 0.0)) throw DomainError("frailty_terms: theta must be non-negative");
  FrailtyTerms t{};
  if (theta == 0.0) {
    const double s = std::exp(-r);
    t.h = r + s;
    t.h_r = 1.0 - s;
    t.h_rr = s;
    t.h_t = s - 0.5 * s * s;
    t.h_rt = -s * (1.0 - s);
    t.h_tt = -s * s + (2.0 / 3.0) * s * s * s;
    return t;
  }
  const double log_q = std::log(theta) - r;
  const double q = std::exp(log_q);
  const double s_over = 1.0 / (std::exp(r) + theta);  // s / (1 + q)
  const double inv_1q = 1.0 / (1.0 + q);
  t.h_r = 1.0 - (1.0 + theta) * s_over;
  t.h_rr = (1.0 + theta) * s_over * inv_1q;
  t.h_rt = -s_over * inv_1q + s_over * s_over;

  if (q < 0.1) {
    const double s = q / theta;
    const LSeries L = l_series(q);
    t.h = r + std::log1p(q) + s * L.l;
    t.h_t = s_over + s * s * L.l1;
    t.h_tt = -s_over * s_over + s * s * s * L.l2;
    return t;
  }
  // log1p(q) and q/(1+q) from log q so that large q does not overflow.
  const double log1p_q = log_q > 0 ? log_q + std::log1p(std::exp(-log_q)) : std::log1p(q);
  const double q_frac = 1.0 / (1.0 + std::exp(-log_q));
  const double n = q_frac - log1p_q;               // q^2 L'(q)
  const double q_frac2 = q_frac * q_frac;          // q^2 / (1+q)^2
  t.h = r + (1.0 + 1.0 / theta) * log1p_q;
  t.h_t = s_over + n / (theta * theta);
  t.h_tt = -s_over * s_over + (-q_frac2 - 2.0 * n) / (theta * theta * theta);
  return t;
}

numerics::Jet neg_log_noise(Noise n, const NoiseParams& p, double z) {
  if (n == Noise::GammaFrailty) {
    const FrailtyTerms f = frailty_terms(z - p.phi, p.theta);
    return {f.h, f.h_r, f.h_rr};
  }
  const double r = (z - p.phi) / p.sigma;
  const numerics::Jet j = standard_rho(n, r);
  return {std::log(p.sigma) + j.value, j.d1 / p.sigma, j.d2 / (p.sigma * p.sigma)};
}

std::array<double, 2> noise_score(Noise n, const NoiseParams& p, double z) {
  if (n == Noise::GammaFrailty) {
    const FrailtyTerms f = frailty_terms(z - p.phi, p.theta);
    return {f.h_r, -f.h_t};
  }
  const double r = (z - p.phi) / p.sigma;
  const numerics::Jet j = standard_rho(n, r);
  return {j.d1 / p.sigma, (-1.0 + r * j.d1) / p.sigma};
}

double sample_noise(Noise n, const NoiseParams& p, numerics::CounterRng& rng) {
  switch (n) {
    case Noise::Gumbel: return p.phi - p.sigma * std::log(-std::log(numerics::uniform_open01(rng)));
    case Noise::Logistic: {
      const double u = numerics::uniform_open01(rng);
      return p.phi + p.sigma * std::log(u / (1.0 - u));
    }
    case Noise::Gaussian: return p.phi + p.sigma * numerics::standard_normal(rng);
    case Noise::GammaFrailty: {
      // Z = phi + log(U) - log(E), U ~ Gamma(1/theta, theta), E ~ Exp(1).
      const double e = -std::log(numerics::uniform_open01(rng));
      const double u = p.theta > 0.0 ? numerics::gamma_draw(rng, 1.0 / p.theta, p.theta) : 1.0;
      return p.phi + std::log(u) - std::log(e);
    }
  }
  throw DomainError("sample_noise: unknown noise");
}

double noise_cdf(Noise n, const NoiseParams& p, double z) {
  switch (n) {
    case Noise::Gumbel: return std::exp(-std::exp(-(z - p.phi) / p.sigma));
    case Noise::Logistic: return 1.0 / (1.0 + std::exp(-(z - p.phi) / p.sigma));
    case Noise::Gaussian: return 0.5 * boost::math::erfc(-(z - p.phi) / (p.sigma * std::numbers::sqrt2));
    case Noise::GammaFrailty: {
      const double r = z - p.phi;
      if (p.theta == 0.0) return std::exp(-std::exp(-r));
      return std::exp(-std::log1p(p.theta * std::exp(-r)) / p.theta);
    }
  }
  throw DomainError("noise_cdf: unknown noise");
}

}  // namespace overfit::models
