#include "run_config.hpp"

#include <fstream>
#include <set>

#include "overfit/error.hpp"

namespace overfit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items())
    if (!ok.count(item.key())) throw ConfigError(where + ": unknown field '" + item.key() + "'");
}

template <class T>
T get(const json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  return get<T>(j, key, where, T{});
}

fs::path path_field(const json& j, const char* key, const std::string& where, const fs::path& base, bool required) {
  if (!j.contains(key)) {
    if (required) throw ConfigError(where + ": missing field '" + key + "'");
    return {};
  }
  const fs::path p = get<std::string>(j, key, where, "");
  if (p.empty()) throw ConfigError(where + "." + key + ": empty path");
  return p.is_absolute() ? p : base / p;
}

rs::RsConfig parse_rs(const json& j, const std::string& where, rs::RsConfig cfg) {
  cfg.hermite_order = get<int>(j, "hermite_order", where, cfg.hermite_order);
  cfg.noise_order = get<int>(j, "noise_order", where, cfg.noise_order);
  cfg.generic_order = get<int>(j, "generic_order", where, cfg.generic_order);
  cfg.tol = get<double>(j, "tol", where, cfg.tol);
  cfg.max_newton = get<int>(j, "max_newton", where, cfg.max_newton);
  try {
    rs::validate(cfg);
  } catch (const DomainError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return cfg;
}

}  // namespace

std::vector<double> parse_grid(const json& j, const std::string& where) {
  std::vector<double> g;
  if (j.is_array()) {
    try {
      g = j.get<std::vector<double>>();
    } catch (const json::exception&) {
      throw ConfigError(where + ": grid entries must be numbers");
    }
  } else if (j.is_object()) {
    only_keys(j, where, {"from", "to", "count"});
    const double a = require<double>(j, "from", where), b = require<double>(j, "to", where);
    const int n = require<int>(j, "count", where);
    if (n < 1) throw ConfigError(where + ": count must be positive");
    if (n == 1) {
      if (a != b) throw ConfigError(where + ": count 1 needs from == to");
      g = {a};
    }
    for (int i = 0; i < n && n > 1; ++i) g.push_back(a + (b - a) * i / (n - 1));
  } else {
    throw ConfigError(where + ": expected an array or {from, to, count}");
  }
  if (g.empty()) throw ConfigError(where + ": empty grid");
  for (std::size_t i = 1; i < g.size(); ++i)
    if (!(g[i] > g[i - 1])) throw ConfigError(where + ": grid must be strictly increasing");
  return g;
}

models::Family RunConfig::require_family() const {
  if (!family) throw ConfigError("config: missing field 'family'");
  return *family;
}

simlab::SimulationPlan RunConfig::plan() const {
  if (!simulate) throw ConfigError("config: missing section 'simulate'");
  simlab::SimulationPlan p;
  p.family = require_family();
  p.N = simulate->N;
  p.zeta_grid = simulate->zeta_grid;
  p.replicates = simulate->replicates;
  p.beta_scale = simulate->beta_scale;
  p.nuisance0 = nuisance0;
  p.base_seed = seed;
  p.fixed_beta0 = simulate->fixed_beta0;
  return p;
}

RunConfig parse_run_config(const json& j, const fs::path& base) {
  only_keys(j, "config",
            {"version", "family", "nuisance0", "seed", "generate", "fit", "solve_rs", "correct", "simulate", "compare",
             "description"});
  if (!j.contains("version")) throw ConfigError("config: missing field 'version'");
  if (get<int>(j, "version", "config", 0) != 1) throw ConfigError("config: unsupported version (expected 1)");
  RunConfig c;
  if (j.contains("family")) c.family = models::family_from_string(get<std::string>(j, "family", "config", ""));
  c.seed = get<std::uint64_t>(j, "seed", "config", c.seed);
  if (j.contains("nuisance0")) {
    const json& n = j["nuisance0"];
    only_keys(n, "nuisance0", {"lambda", "rho", "theta"});
    c.nuisance0.lambda = get<double>(n, "lambda", "nuisance0", 1.0);
    c.nuisance0.rho = get<double>(n, "rho", "nuisance0", 1.0);
    c.nuisance0.theta = get<double>(n, "theta", "nuisance0", 0.0);
  }
  if (c.family) {
    try {
      models::validate(*c.family, c.nuisance0);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("nuisance0: ") + e.what());
    }
  }

  if (j.contains("generate")) {
    const json& s = j["generate"];
    only_keys(s, "generate", {"N", "p", "beta_scale"});
    GenerateSection g;
    g.N = require<int>(s, "N", "generate");
    g.p = require<int>(s, "p", "generate");
    g.beta_scale = get<double>(s, "beta_scale", "generate", g.beta_scale);
    if (g.p < 1 || g.N <= g.p) throw ConfigError("generate: need N > p >= 1");
    if (!(g.beta_scale >= 0.0)) throw ConfigError("generate: beta_scale must be non-negative");
    c.generate = g;
  }
  if (j.contains("fit")) {
    const json& s = j["fit"];
    only_keys(s, "fit", {"dataset", "max_iter", "grad_tol", "fix_shape"});
    FitSection f;
    f.dataset = path_field(s, "dataset", "fit", base, false);
    f.options.max_iter = get<int>(s, "max_iter", "fit", f.options.max_iter);
    f.options.grad_tol = get<double>(s, "grad_tol", "fit", f.options.grad_tol);
    f.options.fix_shape = get<bool>(s, "fix_shape", "fit", false);
    if (f.options.max_iter < 1 || !(f.options.grad_tol > 0.0)) throw ConfigError("fit: invalid iteration settings");
    c.fit = f;
  }
  if (j.contains("solve_rs")) {
    const json& s = j["solve_rs"];
    only_keys(s, "solve_rs",
              {"zeta_grid", "theta0_grid", "hermite_order", "noise_order", "generic_order", "tol", "max_newton"});
    SolveSection r;
    if (!s.contains("zeta_grid")) throw ConfigError("solve_rs: missing field 'zeta_grid'");
    r.zeta_grid = parse_grid(s["zeta_grid"], "solve_rs.zeta_grid");
    for (double z : r.zeta_grid)
      if (!(z > 0.0 && z < 1.0)) throw ConfigError("solve_rs.zeta_grid: values must lie in (0, 1)");
    if (s.contains("theta0_grid")) r.theta0_grid = parse_grid(s["theta0_grid"], "solve_rs.theta0_grid");
    r.rs = parse_rs(s, "solve_rs", r.rs);
    c.solve_rs = r;
  }
  if (j.contains("correct")) {
    const json& s = j["correct"];
    only_keys(s, "correct", {"estimate", "table", "zeta"});
    CorrectSection r;
    r.estimate = path_field(s, "estimate", "correct", base, false);
    r.table = path_field(s, "table", "correct", base, false);
    if (s.contains("zeta")) r.zeta = get<double>(s, "zeta", "correct", 0.0);
    c.correct = r;
  }
  if (j.contains("simulate")) {
    const json& s = j["simulate"];
    only_keys(s, "simulate", {"N", "zeta_grid", "replicates", "beta_scale", "fixed_beta0", "table"});
    SimulateSection r;
    r.N = require<int>(s, "N", "simulate");
    if (!s.contains("zeta_grid")) throw ConfigError("simulate: missing field 'zeta_grid'");
    r.zeta_grid = parse_grid(s["zeta_grid"], "simulate.zeta_grid");
    if (s.contains("replicates")) {
      const json& m = s["replicates"];
      only_keys(m, "simulate.replicates", {"fixed", "per_zeta"});
      if (m.contains("fixed") == m.contains("per_zeta"))
        throw ConfigError("simulate.replicates: give exactly one of 'fixed' and 'per_zeta'");
      if (m.contains("fixed")) r.replicates = simlab::Fixed{get<int>(m, "fixed", "simulate.replicates", 0)};
      else r.replicates = simlab::PerZeta{get<double>(m, "per_zeta", "simulate.replicates", 0.0)};
    }
    r.beta_scale = get<double>(s, "beta_scale", "simulate", r.beta_scale);
    r.fixed_beta0 = get<bool>(s, "fixed_beta0", "simulate", false);
    if (s.contains("table")) r.table = path_field(s, "table", "simulate", base, true);
    c.simulate = r;
    if (c.family) simlab::validate(c.plan());
  }
  if (j.contains("compare")) {
    const json& s = j["compare"];
    only_keys(s, "compare",
              {"summary", "z_limit", "hermite_order", "noise_order", "generic_order", "tol", "max_newton"});
    CompareSection r;
    r.summary = path_field(s, "summary", "compare", base, false);
    r.z_limit = get<double>(s, "z_limit", "compare", r.z_limit);
    if (!(r.z_limit > 0.0)) throw ConfigError("compare: z_limit must be positive");
    r.rs = parse_rs(s, "compare", r.rs);
    c.compare = r;
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return parse_run_config(j, fs::absolute(path).parent_path());
}

}  // namespace overfit::cli
