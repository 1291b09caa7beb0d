#pragma once

#include <array>
#include <string_view>

#include "overfit/models/model.hpp"
#include "overfit/numerics/rng.hpp"
#include "overfit/numerics/scalar_solvers.hpp"

namespace overfit::models {

/// Law of Z in Y = X' varphi + Z.
enum class Noise {
  Gumbel,        // location phi, scale sigma (Weibull PH)
  Logistic,      // location phi, scale sigma (Log-Logistic AFT)
  GammaFrailty,  // location phi, shape theta, unit scale
  Gaussian,      // location phi, scale sigma (linear-model test family)
};

std::string_view to_string(Noise n);
Noise noise_of(Family f);
bool has_scale(Noise n);  // false for GammaFrailty

/// The two nuisance coordinates of a noise law: (phi, sigma) or (phi, theta).
struct NoiseParams {
  double phi = 0.0;
  double sigma = 1.0;
  double theta = 0.0;

  double shape(Noise n) const { return has_scale(n) ? sigma : theta; }
  void set_shape(Noise n, double s) { (has_scale(n) ? sigma : theta) = s; }
};

void validate(Noise n, const NoiseParams& p);

/// Standardised negative log-density rho(r) of the location-scale laws and
/// its first two derivatives, so that -log p_Z(z) = log sigma + rho((z - phi) / sigma).
numerics::Jet standard_rho(Noise n, double r);

/// Terms of the Gamma-frailty negative log-density as a function of the
/// residual r = z - phi:  h = r + (1 + 1/theta) log(1 + theta e^{-r}),
/// together with partial derivatives in r and theta. theta = 0 is the
/// exponential limit.
struct FrailtyTerms {
  double h, h_r, h_rr, h_t, h_rt, h_tt;
};
FrailtyTerms frailty_terms(double r, double theta);

/// -log p_Z(z) with derivatives in z.
numerics::Jet neg_log_noise(Noise n, const NoiseParams& p, double z);

/// Gradient of log p_Z(z) with respect to (phi, shape).
std::array<double, 2> noise_score(Noise n, const NoiseParams& p, double z);

/// One draw of Z.
double sample_noise(Noise n, const NoiseParams& p, numerics::CounterRng& rng);

/// Cumulative distribution function of Z.
double noise_cdf(Noise n, const NoiseParams& p, double z);

}  // namespace overfit::models
