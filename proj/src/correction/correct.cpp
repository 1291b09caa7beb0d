#include <cmath>

#include "interp.hpp"
#include "overfit/correction/correction.hpp"
#include "overfit/error.hpp"
#include "overfit/models/io.hpp"

namespace overfit::correction {

namespace {

void require_family(const CorrectionTable& table, models::Family family, const char* who) {
  if (table.family() != family)
    throw DomainError(std::string(who) + ": table is for " + std::string(models::to_string(table.family())) +
                      ", estimate is " + std::string(models::to_string(family)));
}

}  // namespace

double invert_frailty_theta(double theta_hat, double zeta, const CorrectionTable& table) {
  require_family(table, models::Family::ExpGammaFrailty, "invert_frailty_theta");
  if (!(theta_hat >= 0.0) || !std::isfinite(theta_hat))
    throw DomainError("invert_frailty_theta: theta_hat must be non-negative");
  if (theta_hat == 0.0)
    throw DomainError("invert_frailty_theta: theta_hat = 0, at or beyond the critical zeta; theta0 is not identified");
  std::vector<double> star, theta0;
  for (std::size_t k = 0; k < table.curves().size(); ++k) {
    const double t0 = *table.curves()[k].theta0;
    const double ts = table.at(zeta, t0).theta_star;
    if (ts <= 0.0) continue;
    if (!star.empty() && !(ts > star.back()))
      throw NumericalError("invert_frailty_theta: tabulated curves intersect at zeta " + models::format_double(zeta));
    star.push_back(ts);
    theta0.push_back(t0);
  }
  if (star.empty() || theta_hat < star.front() || theta_hat > star.back())
    throw DomainError("invert_frailty_theta: (zeta, theta_hat) = (" + models::format_double(zeta) + ", " +
                      models::format_double(theta_hat) + ") lies outside the tabulated curves");
  if (star.size() == 1) return theta0.front();
  return detail::MonotoneInterp(star, theta0)(theta_hat);
}

LogLinearCorrected correct_loglinear(const mle::MLEstimate& est, const CorrectionTable& table,
                                     std::optional<double> zeta) {
  require_family(table, est.family, "correct_loglinear");
  LogLinearCorrected out;
  out.zeta = zeta ? *zeta : est.zeta();
  out.varphi = est.beta_hat;
  if (est.family == models::Family::ExpGammaFrailty) {
    out.theta = invert_frailty_theta(est.nuisance_hat.theta, out.zeta, table);
    const CorrectionTable::Lookup l = table.at(out.zeta, out.theta);
    out.phi = est.nuisance_hat.phi - l.g;
    out.sigma = 1.0;
    out.near_failed = l.near_failed;
    return out;
  }
  const double sigma = est.nuisance_hat.sigma;
  if (!(sigma > 0.0)) throw DomainError("correct_loglinear: sigma must be positive");
  const CorrectionTable::Lookup l = table.at(out.zeta);
  out.phi = est.nuisance_hat.phi - sigma * l.g / l.f;
  out.sigma = sigma / l.f;
  out.near_failed = l.near_failed;
  return out;
}

NativeCorrected correct_weibull_native(const models::ModelSpec& est, const CorrectionTable& table, double zeta) {
  require_family(table, models::Family::WeibullPH, "correct_weibull_native");
  if (!(est.nuisance.rho > 0.0)) throw DomainError("correct_weibull_native: rho must be positive");
  if (!(est.nuisance.lambda > 0.0)) throw DomainError("correct_weibull_native: lambda must be positive");
  const CorrectionTable::Lookup l = table.at(zeta);
  return {l.f * est.beta, est.nuisance.lambda * std::exp(-l.g / (l.f * est.nuisance.rho)), l.f * est.nuisance.rho};
}

NativeCorrected correct_loglogistic_native(const models::ModelSpec& est, const CorrectionTable& table, double zeta) {
  require_family(table, models::Family::LogLogisticAFT, "correct_loglogistic_native");
  if (!(est.nuisance.rho > 0.0)) throw DomainError("correct_loglogistic_native: rho must be positive");
  if (!(est.nuisance.lambda > 0.0)) throw DomainError("correct_loglogistic_native: lambda must be positive");
  const CorrectionTable::Lookup l = table.at(zeta);
  return {est.beta, est.nuisance.lambda * std::exp(l.g / (l.f * est.nuisance.rho)), l.f * est.nuisance.rho};
}

nlohmann::json corrected_to_json(const mle::MLEstimate& est, const CorrectionTable& table,
                                 std::optional<double> zeta) {
  const LogLinearCorrected c = correct_loglinear(est, table, zeta);
  nlohmann::json j = mle::to_json(est);
  j["uncorrected"] = {{"beta_hat", j["beta_hat"]}, {"nuisance_hat", j["nuisance_hat"]}};
  j["beta_hat"] = std::vector<double>(c.varphi.data(), c.varphi.data() + c.varphi.size());

  models::LogLinearForm form;
  form.varphi = c.varphi;
  form.phi = c.phi;
  nlohmann::json nu{{"phi", c.phi}};
  CorrectionTable::Lookup l;
  if (est.family == models::Family::ExpGammaFrailty) {
    nu["theta"] = c.theta;
    form.theta = c.theta;
    l = table.at(c.zeta, c.theta);
  } else {
    nu["sigma"] = c.sigma;
    form.sigma = c.sigma;
    l = table.at(c.zeta);
  }
  j["nuisance_hat"] = nu;
  j["native"] = models::to_json(models::from_log_linear(est.family, form));

  nlohmann::json meta{{"zeta", c.zeta}, {"f", l.f}, {"g", l.g}, {"table_hash", table.hash()},
                      {"flags", {{"near_failed_grid_point", c.near_failed}}}};
  if (est.family == models::Family::ExpGammaFrailty) {
    meta["theta_hat"] = est.nuisance_hat.theta;
    meta["theta0_estimate"] = c.theta;
  }
  j["correction"] = meta;
  return j;
}

}  // namespace overfit::correction
