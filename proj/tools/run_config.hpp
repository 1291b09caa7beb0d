#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "overfit/mle/mle.hpp"
#include "overfit/models/model.hpp"
#include "overfit/rs/rs.hpp"
#include "overfit/simlab/simlab.hpp"

namespace overfit::cli {

struct GenerateSection {
  int N = 0;
  int p = 0;
  double beta_scale = 0.15;
};

struct FitSection {
  std::filesystem::path dataset;
  mle::FitOptions options;
};

struct SolveSection {
  std::vector<double> zeta_grid;
  std::vector<double> theta0_grid;
  rs::RsConfig rs;
};

struct CorrectSection {
  std::filesystem::path estimate;
  std::filesystem::path table;
  std::optional<double> zeta;
};

struct SimulateSection {
  int N = 0;
  std::vector<double> zeta_grid;
  std::variant<simlab::Fixed, simlab::PerZeta> replicates = simlab::Fixed{};
  double beta_scale = 0.15;
  bool fixed_beta0 = false;
  std::optional<std::filesystem::path> table;
};

struct CompareSection {
  std::filesystem::path summary;
  double z_limit = 3.0;
  rs::RsConfig rs;
};

/// Version-1 run configuration. Every section is optional; a command
/// requires the one it reads. Relative paths are resolved against the
/// directory of the config file.
struct RunConfig {
  std::optional<models::Family> family;
  models::Nuisance nuisance0;
  std::uint64_t seed = 1;
  std::optional<GenerateSection> generate;
  std::optional<FitSection> fit;
  std::optional<SolveSection> solve_rs;
  std::optional<CorrectSection> correct;
  std::optional<SimulateSection> simulate;
  std::optional<CompareSection> compare;

  models::Family require_family() const;
  simlab::SimulationPlan plan() const;
};

/// Throws ConfigError on unknown fields, wrong types, a missing or
/// unsupported version, or values that fail validation.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// A grid is either an explicit increasing array or
/// {"from": a, "to": b, "count": n} with n equally spaced points.
std::vector<double> parse_grid(const nlohmann::json& j, const std::string& where);

}  // namespace overfit::cli
