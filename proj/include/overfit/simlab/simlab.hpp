#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "overfit/correction/correction.hpp"
#include "overfit/mle/mle.hpp"
#include "overfit/models/model.hpp"
#include "overfit/rs/rs.hpp"

namespace overfit::simlab {

struct ScatterStats {
  double kappa = 0.0;
  double delta = 0.0;
};

/// Least-squares line through the origin of beta_hat against beta0:
/// kappa = beta0'beta_hat / beta0'beta0, delta = residual standard error
/// sqrt(|beta_hat - kappa beta0|^2 / (p - 1)). Throws DomainError for mismatched or short
/// vectors and for beta0 = 0.
ScatterStats scatter_stats(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta0);

/// M replicates at every zeta.
struct Fixed {
  int M = 100;
};
/// M_p = round(base / zeta) replicates at each zeta.
struct PerZeta {
  double base = 100.0;
};

struct SimulationPlan {
  models::Family family = models::Family::WeibullPH;
  int N = 200;
  std::vector<double> zeta_grid;  // increasing, p = round(zeta N)
  std::variant<Fixed, PerZeta> replicates = Fixed{};
  double beta_scale = 0.15;  // standard deviation of the native beta0 components
  models::Nuisance nuisance0;
  std::uint64_t base_seed = 1;
  /// Draw beta0 once per zeta and share it across replicates.
  bool fixed_beta0 = false;
  mle::FitOptions fit;
};

/// Throws ConfigError when the plan is invalid: empty or unsorted grid,
/// zeta outside (0, 1), p < 1 or p >= N, or fewer than two replicates.
void validate(const SimulationPlan& plan);

int p_of(const SimulationPlan& plan, double zeta);
int replicates_at(const SimulationPlan& plan, double zeta);

/// Replicate seed: derive_seed(derive_seed(base_seed, zeta index), replicate).
/// From it, beta0 uses derive_seed(seed, 0) and the data set derive_seed(seed, 1).
std::uint64_t replicate_seed(std::uint64_t base_seed, std::size_t zeta_index, std::size_t replicate);

struct Stat {
  double mean = 0.0;
  double se = 0.0;
};

/// Mean and standard error of the mean (sample SD / sqrt(n)); se is NaN
/// when fewer than two values are given.
Stat mean_se(const std::vector<double>& values);

/// Per-replicate quantities. `ratios` follows ratio_names(family, corrected).
struct ReplicateResult {
  bool ok = false;
  ScatterStats scatter;
  std::vector<double> ratios;
};

/// Names of the nuisance and derived columns, in order.
///   Weibull, Log-Logistic: sigma_ratio, phi_shift, lambda_ratio, rho_ratio, kappa_native
///   frailty: theta, phi_shift, lambda_ratio, kappa_native
/// With a correction table the location-scale families also get
///   sigma_corrected_ratio, phi_corrected_shift, rho_corrected_ratio, kappa_native_corrected.
std::vector<std::string> ratio_names(models::Family family, bool corrected);

struct ZetaSummary {
  double zeta = 0.0;
  int p = 0;
  int N = 0;
  int M = 0;
  Stat kappa;
  Stat delta;
  std::vector<Stat> ratios;  // aligned with SimulationSummary::ratio_names
  int n_converged = 0;
  int n_failed = 0;
  /// More than 20% of the replicates failed.
  bool flagged() const { return n_failed * 5 > M; }
};

struct SimulationSummary {
  models::Family family = models::Family::WeibullPH;
  std::vector<std::string> ratio_names;
  std::vector<ZetaSummary> rows;
};

/// One replicate: draw beta0 and a data set, fit, and compute scatter
/// statistics (log-linear scale) and the ratio columns.
ReplicateResult run_replicate(const SimulationPlan& plan, double zeta, std::uint64_t seed,
                              const correction::CorrectionTable* table = nullptr,
                              const Eigen::VectorXd* beta0 = nullptr);

/// Aggregates replicate results in order; failed replicates are counted and
/// excluded from the means.
ZetaSummary aggregate(double zeta, int p, int N, const std::vector<ReplicateResult>& reps);

/// Runs every replicate of the plan on up to `threads` threads. Results are
/// reduced in replicate order, so the summary does not depend on `threads`.
/// With a table, corrected columns are added (location-scale families only).
SimulationSummary run_plan(const SimulationPlan& plan, int threads = 1,
                           const correction::CorrectionTable* table = nullptr);

/// CSV: family,zeta,p,N,M,kappa,kappa_se,delta,delta_se,<ratio>,<ratio>_se...,n_failed
void write_summary_csv(std::ostream& out, const SimulationSummary& s);
void write_summary_csv(const std::string& path, const SimulationSummary& s);
/// Throws ConfigError on malformed input.
SimulationSummary read_summary_csv(std::istream& in);
SimulationSummary read_summary_csv(const std::string& path);

/// RS solutions of the family at the given zeta values with the log-linear
/// truth of `nuisance0` (its theta for the frailty family).
std::vector<rs::RSSolution> theory_solutions(models::Family family, const std::vector<double>& zeta_grid,
                                             const models::Nuisance& nuisance0, const rs::RsConfig& cfg = {});

struct ComparisonEntry {
  std::string name;
  double sim = 0.0;
  double se = 0.0;
  double theory = 0.0;
  double z = 0.0;
};

struct ComparisonRow {
  double zeta = 0.0;
  int p = 0;
  std::vector<ComparisonEntry> entries;
};

struct ComparisonReport {
  models::Family family = models::Family::WeibullPH;
  std::vector<ComparisonRow> rows;
  double z_limit = 3.0;
  double max_abs_z = 0.0;
  bool pass = true;  // every |z| <= z_limit
};

/// E[s]/sigma for the residual standard error s of a p-component scatter
/// with Gaussian residuals (p - 1 degrees of freedom).
double c4(int p);

/// Theory value of a summary column, if it has one:
///   kappa -> w*/S, delta -> c4(p) v*/sqrt(p), sigma_ratio -> f, phi_shift -> g,
///   rho_ratio -> 1/f, theta -> theta*, kappa_native -> w*/(S f) for Weibull
///   and w*/S otherwise; corrected columns -> 1, or 0 for the shift.
/// v* must be in the units of the truth, as from theory_solutions.
std::optional<double> theory_value(const std::string& column, models::Family family, const rs::RSSolution& sol,
                                   int p);

/// z = (sim - theory)/se for every column with a theory value. `theory`
/// holds one solution per summary row, solved at that row's p/N. Throws
/// DomainError on a family or grid mismatch and ConvergenceError when a
/// theory point did not converge.
ComparisonReport compare_to_theory(const SimulationSummary& summary, const std::vector<rs::RSSolution>& theory,
                                   double z_limit = 3.0);

/// Solves the RS system at each row's p/N and compares.
ComparisonReport compare_to_theory(const SimulationSummary& summary, const models::Nuisance& nuisance0,
                                   const rs::RsConfig& cfg = {}, double z_limit = 3.0);

/// Columns zeta,p then <name>,<name>_se,<name>_theory,z_<name> per entry, then pass.
void write_comparison_csv(std::ostream& out, const ComparisonReport& r);
void write_comparison_csv(const std::string& path, const ComparisonReport& r);

}  // namespace overfit::simlab
