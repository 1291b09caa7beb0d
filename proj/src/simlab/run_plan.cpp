#include <algorithm>
#include <atomic>
#include <boost/algorithm/string.hpp>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "overfit/error.hpp"
#include "overfit/models/dataset.hpp"
#include "overfit/models/io.hpp"
#include "overfit/numerics/rng.hpp"
#include "overfit/simlab/simlab.hpp"

namespace overfit::simlab {

namespace {

bool is_frailty(models::Family f) { return f == models::Family::ExpGammaFrailty; }

constexpr std::uint64_t kSharedBeta0Stream = std::numeric_limits<std::uint64_t>::max() - 1;

}  // namespace

int p_of(const SimulationPlan& plan, double zeta) {
  return static_cast<int>(std::lround(zeta * plan.N));
}

int replicates_at(const SimulationPlan& plan, double zeta) {
  if (const auto* f = std::get_if<Fixed>(&plan.replicates)) return f->M;
  return static_cast<int>(std::lround(std::get<PerZeta>(plan.replicates).base / zeta));
}

void validate(const SimulationPlan& plan) {
  if (plan.N < 3) throw ConfigError("simulation plan: N must be at least 3");
  if (plan.zeta_grid.empty()) throw ConfigError("simulation plan: empty zeta grid");
  if (!(plan.beta_scale > 0.0) || !std::isfinite(plan.beta_scale))
    throw ConfigError("simulation plan: beta_scale must be positive");
  try {
    models::validate(plan.family, plan.nuisance0);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("simulation plan: ") + e.what());
  }
  for (std::size_t i = 0; i < plan.zeta_grid.size(); ++i) {
    const double z = plan.zeta_grid[i];
    if (!(z > 0.0 && z < 1.0)) throw ConfigError("simulation plan: zeta must lie in (0, 1)");
    if (i > 0 && !(z > plan.zeta_grid[i - 1])) throw ConfigError("simulation plan: zeta grid must be increasing");
    const int p = p_of(plan, z);
    if (p < 1 || p >= plan.N)
      throw ConfigError("simulation plan: zeta " + models::format_double(z) + " gives p = " + std::to_string(p) +
                        ", need 1 <= p < N");
    if (p < 2) throw ConfigError("simulation plan: scatter statistics need p >= 2");
    if (replicates_at(plan, z) < 2) throw ConfigError("simulation plan: need at least two replicates per zeta");
  }
}

std::vector<std::string> ratio_names(models::Family family, bool corrected) {
  if (is_frailty(family)) return {"theta", "phi_shift", "lambda_ratio", "kappa_native"};
  std::vector<std::string> n{"sigma_ratio", "phi_shift", "lambda_ratio", "rho_ratio", "kappa_native"};
  if (corrected) {
    for (const char* c : {"sigma_corrected_ratio", "phi_corrected_shift", "rho_corrected_ratio",
                          "kappa_native_corrected"})
      n.emplace_back(c);
  }
  return n;
}

ReplicateResult run_replicate(const SimulationPlan& plan, double zeta, std::uint64_t seed,
                              const correction::CorrectionTable* table, const Eigen::VectorXd* beta0) {
  const int p = p_of(plan, zeta);
  models::ModelSpec spec;
  spec.family = plan.family;
  spec.nuisance = plan.nuisance0;
  spec.beta = beta0 ? *beta0 : models::sample_beta0(p, plan.beta_scale, numerics::derive_seed(seed, 0));
  const models::Dataset data = models::sample_dataset(spec, plan.N, p, numerics::derive_seed(seed, 1));
  const models::LogLinearForm truth = models::to_log_linear(spec);

  ReplicateResult out;
  try {
    const mle::MLEstimate est = mle::fit(data, plan.family, plan.fit);
    if (!est.converged) return out;
    const models::ModelSpec native = est.native();
    out.scatter = scatter_stats(est.beta_hat, truth.varphi);
    const double kappa_native = scatter_stats(native.beta, spec.beta).kappa;
    const double lambda_ratio = native.nuisance.lambda / spec.nuisance.lambda;
    if (is_frailty(plan.family)) {
      out.ratios = {est.nuisance_hat.theta, est.nuisance_hat.phi - truth.phi, lambda_ratio, kappa_native};
    } else {
      const double s0 = truth.sigma;
      out.ratios = {est.nuisance_hat.sigma / s0, (est.nuisance_hat.phi - truth.phi) / s0, lambda_ratio,
                    native.nuisance.rho / spec.nuisance.rho, kappa_native};
      if (table) {
        const double z = static_cast<double>(p) / plan.N;
        const correction::LogLinearCorrected c = correction::correct_loglinear(est, *table, z);
        const correction::NativeCorrected nc = plan.family == models::Family::WeibullPH
                                                   ? correction::correct_weibull_native(native, *table, z)
                                                   : correction::correct_loglogistic_native(native, *table, z);
        out.ratios.insert(out.ratios.end(), {c.sigma / s0, (c.phi - truth.phi) / s0, nc.rho / spec.nuisance.rho,
                                             scatter_stats(nc.beta, spec.beta).kappa});
      }
    }
    for (double v : out.ratios)
      if (!std::isfinite(v)) return {};
    out.ok = std::isfinite(out.scatter.kappa) && std::isfinite(out.scatter.delta);
  } catch (const DomainError&) {
    return {};
  } catch (const ConvergenceError&) {
    return {};
  } catch (const NumericalError&) {
    return {};
  }
  return out;
}

SimulationSummary run_plan(const SimulationPlan& plan, int threads, const correction::CorrectionTable* table) {
  validate(plan);
  if (table) {
    if (is_frailty(plan.family)) throw ConfigError("run_plan: corrected columns are not defined for the frailty family");
    if (table->family() != plan.family) throw ConfigError("run_plan: correction table is for another family");
    const double top = static_cast<double>(p_of(plan, plan.zeta_grid.back())) / plan.N;
    if (top > table->zeta_max()) throw ConfigError("run_plan: correction table does not cover the zeta grid");
  }

  struct Task {
    std::size_t zeta_index;
    std::size_t replicate;
  };
  std::vector<Task> tasks;
  std::vector<std::vector<ReplicateResult>> results(plan.zeta_grid.size());
  std::vector<std::optional<Eigen::VectorXd>> shared_beta0(plan.zeta_grid.size());
  for (std::size_t j = 0; j < plan.zeta_grid.size(); ++j) {
    const int M = replicates_at(plan, plan.zeta_grid[j]);
    results[j].resize(static_cast<std::size_t>(M));
    for (int r = 0; r < M; ++r) tasks.push_back({j, static_cast<std::size_t>(r)});
    if (plan.fixed_beta0) {
      const std::uint64_t s = numerics::derive_seed(numerics::derive_seed(plan.base_seed, j), kSharedBeta0Stream);
      shared_beta0[j] = models::sample_beta0(p_of(plan, plan.zeta_grid[j]), plan.beta_scale, s);
    }
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks.size(); k = next++) {
      const Task& t = tasks[k];
      try {
        const Eigen::VectorXd* b0 = shared_beta0[t.zeta_index] ? &*shared_beta0[t.zeta_index] : nullptr;
        results[t.zeta_index][t.replicate] =
            run_replicate(plan, plan.zeta_grid[t.zeta_index], replicate_seed(plan.base_seed, t.zeta_index, t.replicate),
                          table, b0);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(threads < 1 ? 1 : static_cast<std::size_t>(threads), 1,
                                                        std::max<std::size_t>(tasks.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  SimulationSummary s;
  s.family = plan.family;
  s.ratio_names = ratio_names(plan.family, table != nullptr);
  for (std::size_t j = 0; j < plan.zeta_grid.size(); ++j) {
    ZetaSummary z = aggregate(plan.zeta_grid[j], p_of(plan, plan.zeta_grid[j]), plan.N, results[j]);
    if (z.ratios.empty()) z.ratios.assign(s.ratio_names.size(), mean_se({}));
    s.rows.push_back(std::move(z));
  }
  return s;
}

void write_summary_csv(std::ostream& out, const SimulationSummary& s) {
  using models::format_double;
  out << "family,zeta,p,N,M,kappa,kappa_se,delta,delta_se";
  for (const std::string& n : s.ratio_names) out << ',' << n << ',' << n << "_se";
  out << ",n_failed\n";
  const std::string fam(models::to_string(s.family));
  for (const ZetaSummary& z : s.rows) {
    if (z.ratios.size() != s.ratio_names.size()) throw DomainError("write_summary_csv: ratio columns do not match");
    out << fam << ',' << format_double(z.zeta) << ',' << z.p << ',' << z.N << ',' << z.M << ','
        << format_double(z.kappa.mean) << ',' << format_double(z.kappa.se) << ',' << format_double(z.delta.mean) << ','
        << format_double(z.delta.se);
    for (const Stat& r : z.ratios) out << ',' << format_double(r.mean) << ',' << format_double(r.se);
    out << ',' << z.n_failed << '\n';
  }
}

void write_summary_csv(const std::string& path, const SimulationSummary& s) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "' for writing");
  write_summary_csv(f, s);
  if (!f) throw ConfigError("failed writing " + path);
}

SimulationSummary read_summary_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("summary: empty input");
  boost::algorithm::trim(line);
  std::vector<std::string> head;
  boost::algorithm::split(head, line, [](char ch) { return ch == ','; });
  const std::vector<std::string> fixed{"family", "zeta", "p", "N", "M", "kappa", "kappa_se", "delta", "delta_se"};
  if (head.size() < fixed.size() + 1 || !std::equal(fixed.begin(), fixed.end(), head.begin()) ||
      head.back() != "n_failed" || (head.size() - fixed.size() - 1) % 2 != 0)
    throw ConfigError("summary: unexpected header '" + line + "'");
  SimulationSummary s;
  for (std::size_t k = fixed.size(); k + 1 < head.size(); k += 2) {
    if (head[k + 1] != head[k] + "_se") throw ConfigError("summary: column '" + head[k] + "' lacks its _se column");
    s.ratio_names.push_back(head[k]);
  }

  std::size_t lineno = 1;
  auto number = [&](const std::string& c) {
    try {
      std::size_t used = 0;
      const double v = std::stod(c, &used);
      if (used != c.size()) throw std::invalid_argument(c);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("summary line " + std::to_string(lineno) + ": bad number '" + c + "'");
    }
  };
  auto integer = [&](const std::string& c) {
    const double v = number(c);
    if (v != std::floor(v) || v < 0) throw ConfigError("summary line " + std::to_string(lineno) + ": bad count '" + c + "'");
    return static_cast<int>(v);
  };
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    boost::algorithm::trim(line);
    if (line.empty()) continue;
    std::vector<std::string> c;
    boost::algorithm::split(c, line, [](char ch) { return ch == ','; });
    if (c.size() != head.size())
      throw ConfigError("summary line " + std::to_string(lineno) + ": expected " + std::to_string(head.size()) +
                        " fields");
    const models::Family fam = models::family_from_string(c[0]);
    if (first) s.family = fam;
    else if (fam != s.family) throw ConfigError("summary: mixed families");
    first = false;
    ZetaSummary z;
    z.zeta = number(c[1]);
    z.p = integer(c[2]);
    z.N = integer(c[3]);
    z.M = integer(c[4]);
    z.kappa = {number(c[5]), number(c[6])};
    z.delta = {number(c[7]), number(c[8])};
    for (std::size_t k = fixed.size(); k + 1 < c.size(); k += 2) z.ratios.push_back({number(c[k]), number(c[k + 1])});
    z.n_failed = integer(c.back());
    if (z.n_failed > z.M) throw ConfigError("summary line " + std::to_string(lineno) + ": n_failed exceeds M");
    z.n_converged = z.M - z.n_failed;
    s.rows.push_back(std::move(z));
  }
  if (s.rows.empty()) throw ConfigError("summary: no rows");
  return s;
}

SimulationSummary read_summary_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "'");
  return read_summary_csv(f);
}

}  // namespace overfit::simlab
