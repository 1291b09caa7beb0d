// overfit: command-line front end.
//
//   overfit [--config FILE] [--seed N] [--threads N] [--out DIR] <command> [options]
//
// Exit codes: 0 success, 1 usage or configuration error, 2 numerical
// non-convergence, 3 theory comparison failed.

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "overfit/correction/correction.hpp"
#include "overfit/error.hpp"
#include "overfit/mle/mle.hpp"
#include "overfit/models/dataset.hpp"
#include "overfit/models/io.hpp"
#include "overfit/numerics/rng.hpp"
#include "overfit/rs/rs.hpp"
#include "overfit/simlab/simlab.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace overfit;

namespace {

enum Exit { kOk = 0, kUsage = 1, kNoConvergence = 2, kComparisonFailed = 3 };

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::string out = ".";
};

struct PathOptions {
  std::string dataset, family, estimate, table, summary;
  std::optional<double> zeta;
};

cli::RunConfig config_of(const Globals& g, bool required) {
  if (g.config.empty()) {
    if (required) throw ConfigError("this command needs --config");
    return {};
  }
  return cli::load_run_config(g.config);
}

fs::path out_dir(const Globals& g) {
  fs::path d(g.out);
  fs::create_directories(d);
  return d;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open '" + path.string() + "' for writing");
  f << j.dump(2) << '\n';
  if (!f) throw ConfigError("failed writing " + path.string());
}

/// Runs body(k) for k in [0, n) on up to `threads` threads; rethrows the
/// first exception.
template <class Body>
void parallel_for(std::size_t n, int threads, Body body) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex m;
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        body(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(m);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t t = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, std::max<std::size_t>(n, 1));
  for (std::size_t i = 1; i < t; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

int cmd_generate(const Globals& g) {
  const cli::RunConfig c = config_of(g, true);
  if (!c.generate) throw ConfigError("config: missing section 'generate'");
  const std::uint64_t seed = g.seed.value_or(c.seed);
  models::ModelSpec spec;
  spec.family = c.require_family();
  spec.nuisance = c.nuisance0;
  spec.beta = models::sample_beta0(c.generate->p, c.generate->beta_scale, numerics::derive_seed(seed, 0));
  const models::Dataset d = models::sample_dataset(spec, c.generate->N, c.generate->p, numerics::derive_seed(seed, 1));
  const fs::path dir = out_dir(g);
  models::write_dataset_csv((dir / "dataset.csv").string(), d);
  write_json(dir / "model.json", models::to_json(spec));
  const double S2 = models::to_log_linear(spec).varphi.squaredNorm();
  std::cout << json{{"seed", seed}, {"S2", S2}, {"N", d.n()}, {"p", d.p()}, {"zeta", d.zeta},
                    {"dataset", (dir / "dataset.csv").string()}, {"model", (dir / "model.json").string()}}
                   .dump()
            << '\n';
  return kOk;
}

int cmd_fit(const Globals& g, const PathOptions& o) {
  const cli::RunConfig c = config_of(g, false);
  fs::path dataset = o.dataset;
  if (dataset.empty() && c.fit) dataset = c.fit->dataset;
  if (dataset.empty()) throw ConfigError("fit: no dataset given (--dataset or fit.dataset)");
  const models::Family family = o.family.empty() ? c.require_family() : models::family_from_string(o.family);
  const mle::FitOptions opts = c.fit ? c.fit->options : mle::FitOptions{};
  const models::Dataset d = models::read_dataset_csv(dataset.string());
  const mle::MLEstimate est = mle::fit(d, family, opts);
  const fs::path path = out_dir(g) / "estimate.json";
  write_json(path, mle::to_json(est));
  if (!est.converged) {
    std::cerr << json{{"error", "fit did not converge"},
                      {"message", est.message},
                      {"iterations", est.iterations},
                      {"grad_norm", est.grad_norm},
                      {"estimate", path.string()}}
                     .dump(2)
              << '\n';
    return kNoConvergence;
  }
  std::cout << path.string() << '\n';
  return kOk;
}

int cmd_solve_rs(const Globals& g) {
  const cli::RunConfig c = config_of(g, true);
  if (!c.solve_rs) throw ConfigError("config: missing section 'solve_rs'");
  const models::Family family = c.require_family();
  const bool frailty = family == models::Family::ExpGammaFrailty;
  const cli::SolveSection& s = *c.solve_rs;
  if (frailty && s.theta0_grid.empty()) throw ConfigError("solve_rs: the frailty family needs theta0_grid");
  if (!frailty && !s.theta0_grid.empty()) throw ConfigError("solve_rs: theta0_grid is only used by the frailty family");
  const std::vector<double> theta0s = frailty ? s.theta0_grid : std::vector<double>{0.0};
  for (double t : theta0s)
    if (!(t >= 0.0)) throw ConfigError("solve_rs.theta0_grid: values must be non-negative");

  std::vector<std::vector<rs::RSSolution>> sweeps(theta0s.size());
  parallel_for(theta0s.size(), g.threads,
               [&](std::size_t k) { sweeps[k] = rs::solve_rs_sweep(family, s.zeta_grid, s.rs, theta0s[k]); });

  std::vector<correction::CorrectionCurve> curves;
  std::ostringstream sol_csv;
  bool all_converged = true;
  for (std::size_t k = 0; k < sweeps.size(); ++k) {
    std::ostringstream part;
    rs::write_solutions_csv(part, sweeps[k]);
    std::istringstream lines(part.str());
    std::string line;
    bool header = true;
    while (std::getline(lines, line)) {
      if (header) {
        header = false;
        if (k == 0) sol_csv << (frailty ? "theta0," : "") << line << '\n';
        continue;
      }
      sol_csv << (frailty ? models::format_double(theta0s[k]) + "," : "") << line << '\n';
    }
    correction::CorrectionCurve curve;
    if (frailty) curve.theta0 = theta0s[k];
    for (const rs::RSSolution& sol : sweeps[k]) {
      curve.zeta.push_back(sol.zeta);
      curve.f.push_back(sol.f());
      curve.g.push_back(sol.g());
      if (frailty) curve.theta_star.push_back(sol.nuisance_star.theta);
      curve.converged.push_back(sol.converged);
      all_converged = all_converged && sol.converged;
    }
    curves.push_back(std::move(curve));
  }
  const fs::path dir = out_dir(g);
  {
    std::ofstream f(dir / "rs_solutions.csv");
    f << sol_csv.str();
    if (!f) throw ConfigError("failed writing rs_solutions.csv");
  }
  const correction::CorrectionTable table(family, std::move(curves));
  correction::write_table_csv((dir / "correction_table.csv").string(), table);
  std::cout << json{{"solutions", (dir / "rs_solutions.csv").string()},
                    {"table", (dir / "correction_table.csv").string()},
                    {"table_hash", table.hash()},
                    {"all_converged", all_converged}}
                   .dump()
            << '\n';
  if (!all_converged) {
    std::cerr << "solve-rs: some grid points did not converge; they are written as NaN\n";
    return kNoConvergence;
  }
  return kOk;
}

int cmd_correct(const Globals& g, const PathOptions& o) {
  const cli::RunConfig c = config_of(g, false);
  fs::path estimate = o.estimate, table_path = o.table;
  std::optional<double> zeta = o.zeta;
  if (c.correct) {
    if (estimate.empty()) estimate = c.correct->estimate;
    if (table_path.empty()) table_path = c.correct->table;
    if (!zeta) zeta = c.correct->zeta;
  }
  if (estimate.empty() || table_path.empty()) throw ConfigError("correct: need an estimate and a table");
  std::ifstream in(estimate);
  if (!in) throw ConfigError("cannot open '" + estimate.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("estimate '" + estimate.string() + "': " + e.what());
  }
  const mle::MLEstimate est = mle::estimate_from_json(j);
  const correction::CorrectionTable table = correction::read_table_csv(table_path.string());
  const json out = correction::corrected_to_json(est, table, zeta);
  const fs::path path = out_dir(g) / "corrected.json";
  write_json(path, out);
  if (out["correction"]["flags"]["near_failed_grid_point"].get<bool>())
    std::cerr << "correct: zeta lies next to a non-converged table point\n";
  std::cout << path.string() << '\n';
  return kOk;
}

int cmd_simulate(const Globals& g) {
  cli::RunConfig c = config_of(g, true);
  if (g.seed) c.seed = *g.seed;
  const simlab::SimulationPlan plan = c.plan();
  std::optional<correction::CorrectionTable> table;
  if (c.simulate->table) table = correction::read_table_csv(c.simulate->table->string());
  const simlab::SimulationSummary s = simlab::run_plan(plan, g.threads, table ? &*table : nullptr);
  const fs::path path = out_dir(g) / "summary.csv";
  simlab::write_summary_csv(path.string(), s);
  for (const simlab::ZetaSummary& z : s.rows)
    if (z.flagged())
      std::cerr << "simulate: zeta " << z.zeta << ": " << z.n_failed << " of " << z.M << " fits failed\n";
  std::cout << path.string() << '\n';
  return kOk;
}

int cmd_compare(const Globals& g, const PathOptions& o) {
  const cli::RunConfig c = config_of(g, false);
  fs::path summary_path = o.summary;
  if (summary_path.empty() && c.compare) summary_path = c.compare->summary;
  if (summary_path.empty()) throw ConfigError("compare: no summary given (--summary or compare.summary)");
  const simlab::SimulationSummary s = simlab::read_summary_csv(summary_path.string());
  if (c.family && *c.family != s.family)
    throw ConfigError("compare: summary is for " + std::string(models::to_string(s.family)) + ", config for " +
                      std::string(models::to_string(*c.family)));
  const cli::CompareSection cmp = c.compare.value_or(cli::CompareSection{});
  const simlab::ComparisonReport r = simlab::compare_to_theory(s, c.nuisance0, cmp.rs, cmp.z_limit);
  const fs::path path = out_dir(g) / "comparison.csv";
  simlab::write_comparison_csv(path.string(), r);
  std::cout << json{{"comparison", path.string()}, {"max_abs_z", r.max_abs_z}, {"pass", r.pass}}.dump() << '\n';
  return r.pass ? kOk : kComparisonFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Overfitting bias of survival-model maximum likelihood: simulation, RS theory and correction"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  PathOptions o;
  app.add_option("--config", g.config, "run configuration (JSON, version 1)");
  app.add_option("--seed", g.seed, "base seed, overrides the config");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output directory");

  auto* gen = app.add_subcommand("generate", "sample a data set and its true model");
  auto* fit = app.add_subcommand("fit", "maximum likelihood fit of a data set");
  fit->add_option("--dataset", o.dataset, "dataset CSV");
  fit->add_option("--family", o.family, "weibull, loglogistic or frailty");
  auto* solve = app.add_subcommand("solve-rs", "solve the RS equations on a grid and write the correction table");
  auto* corr = app.add_subcommand("correct", "apply the overfitting correction to an estimate");
  corr->add_option("--estimate", o.estimate, "estimate JSON written by fit");
  corr->add_option("--table", o.table, "correction table CSV written by solve-rs");
  corr->add_option("--zeta", o.zeta, "p/N, defaults to the estimate's");
  auto* sim = app.add_subcommand("simulate", "run a simulation plan and write the summary CSV");
  auto* cmp = app.add_subcommand("compare", "compare a simulation summary with RS theory");
  cmp->add_option("--summary", o.summary, "summary CSV written by simulate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_generate(g);
    if (*fit) return cmd_fit(g, o);
    if (*solve) return cmd_solve_rs(g);
    if (*corr) return cmd_correct(g, o);
    if (*sim) return cmd_simulate(g);
    if (*cmp) return cmd_compare(g, o);
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNoConvergence;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNoConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
