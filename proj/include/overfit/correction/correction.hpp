#pragma once

#include <cstdint>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "overfit/mle/mle.hpp"
#include "overfit/models/model.hpp"
#include "overfit/rs/rs.hpp"

namespace overfit::correction {

/// Correction factors along one RS sweep. For the frailty family each curve
/// belongs to one true variance theta0 and records theta*(zeta) as well.
struct CorrectionCurve {
  std::optional<double> theta0;
  std::vector<double> zeta;        // strictly increasing, in (0, 1)
  std::vector<double> f;           // sigma*/sigma0 (1 for frailty)
  std::vector<double> g;           // (phi* - phi0)/sigma0
  std::vector<double> theta_star;  // frailty only
  std::vector<bool> converged;
};

/// Correction curves of one family. Lookups use monotone cubic (PCHIP)
/// interpolation through the converged grid points together with the exact
/// classical limit f = 1, g = 0, theta* = theta0 at zeta = 0, so any zeta in
/// (0, zeta_max] can be corrected. Immutable once built.
class CorrectionTable {
 public:
  CorrectionTable() = default;
  /// Throws DomainError when curves are malformed: unsorted grids, f <= 0,
  /// mixed theta0 presence, or theta0 values that are not increasing.
  CorrectionTable(models::Family family, std::vector<CorrectionCurve> curves);

  models::Family family() const { return family_; }
  const std::vector<CorrectionCurve>& curves() const { return curves_; }

  /// Largest zeta covered by every curve.
  double zeta_max() const;

  struct Lookup {
    double f = 1.0;
    double g = 0.0;
    double theta_star = 0.0;
    /// A non-converged grid point lies next to zeta and was skipped.
    bool near_failed = false;
  };

  /// Values of the single curve (Weibull, Log-Logistic). Throws DomainError
  /// for zeta outside (0, zeta_max()].
  Lookup at(double zeta) const;
  /// Values of the frailty curve with true variance theta0, interpolated
  /// across the tabulated theta0 values.
  Lookup at(double zeta, double theta0) const;

  /// FNV-1a hash of the CSV serialisation, printed in hexadecimal.
  std::string hash() const;

 private:
  Lookup curve_at(std::size_t k, double zeta) const;

  models::Family family_ = models::Family::WeibullPH;
  std::vector<CorrectionCurve> curves_;
};

/// Solves the RS system of `family` along zeta_grid (once per theta0 for the
/// frailty family, which requires a non-empty theta0_grid). Frailty curves are
/// solved on up to `threads` threads; the result does not depend on it.
CorrectionTable build_correction_table(models::Family family, const std::vector<double>& zeta_grid,
                                       const std::vector<double>& theta0_grid = {}, const rs::RsConfig& cfg = {},
                                       int threads = 1);

/// CSV with header `family,zeta,f,g` and, for frailty, `,theta0,theta_star`;
/// rows whose solve did not converge are written with NaN values.
void write_table_csv(std::ostream& out, const CorrectionTable& table);
void write_table_csv(const std::string& path, const CorrectionTable& table);
/// Throws ConfigError on malformed input.
CorrectionTable read_table_csv(std::istream& in);
CorrectionTable read_table_csv(const std::string& path);

struct LogLinearCorrected {
  Eigen::VectorXd varphi;
  double phi = 0.0;
  double sigma = 1.0;
  double theta = 0.0;  // frailty only: estimated theta0
  double zeta = 0.0;
  bool near_failed = false;
};

/// phi~ = phi^ - sigma^ g/f, sigma~ = sigma^/f, varphi unchanged. For the
/// frailty family theta0 is first estimated with invert_frailty_theta and
/// phi~ = phi^ - g(zeta; theta0). zeta defaults to est.zeta().
LogLinearCorrected correct_loglinear(const mle::MLEstimate& est, const CorrectionTable& table,
                                     std::optional<double> zeta = std::nullopt);

struct NativeCorrected {
  Eigen::VectorXd beta;
  double lambda = 1.0;
  double rho = 1.0;
};

/// beta~ = f beta^, lambda~ = lambda^ exp(-g/(f rho^)), rho~ = f rho^, from
/// native estimates. Throws DomainError for rho^ <= 0 or lambda^ <= 0.
NativeCorrected correct_weibull_native(const models::ModelSpec& est, const CorrectionTable& table, double zeta);

/// beta~ = beta^, rho~ = f rho^, lambda~ = lambda^ exp(sigma^ g/f) with
/// lambda = exp(-phi); g vanishes for this family so lambda~ = lambda^.
NativeCorrected correct_loglogistic_native(const models::ModelSpec& est, const CorrectionTable& table, double zeta);

/// Estimate of theta0 from an ML estimate theta^ at zeta: the root of
/// theta0 -> theta*(zeta; theta0) = theta^ through monotone interpolation
/// across the tabulated curves. Throws DomainError for theta^ = 0 (at or past
/// the critical zeta, where the curves cannot be inverted) and for points
/// outside the envelope of the tabulated curves.
double invert_frailty_theta(double theta_hat, double zeta, const CorrectionTable& table);

/// Corrected estimate as JSON: the fields of mle::to_json with corrected
/// values, plus a `correction` object holding zeta, f, g, the table hash
/// and interpolation flags.
nlohmann::json corrected_to_json(const mle::MLEstimate& est, const CorrectionTable& table,
                                 std::optional<double> zeta = std::nullopt);

}  // namespace overfit::correction
