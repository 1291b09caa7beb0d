#pragma once

#include <iosfwd>
#include <json.hpp>
#include <string>

#include "overfit/models/dataset.hpp"
#include "overfit/models/model.hpp"

namespace overfit::models {

/// CSV with header `t,x1,...,xp`; values written with 17 significant digits
/// so that doubles round-trip exactly.
void write_dataset_csv(std::ostream& out, const Dataset& d);
void write_dataset_csv(const std::string& path, const Dataset& d);
/// Throws ConfigError on malformed input. zeta is recomputed as p/N.
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::string& path);

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

/// Formats a double with 17 significant digits.
std::string format_double(double x);

}  // namespace overfit::models
