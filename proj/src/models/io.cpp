#include "overfit/models/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "overfit/error.hpp"

namespace overfit::models {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_dataset_csv(std::ostream& out, const Dataset& d) {
  out << 't';
  for (Eigen::Index k = 0; k < d.p(); ++k) out << ",x" << (k + 1);
  out << '\n';
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    out << format_double(d.T(i));
    for (Eigen::Index k = 0; k < d.p(); ++k) out << ',' << format_double(d.X(i, k));
    out << '\n';
  }
}

void write_dataset_csv(const std::string& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  write_dataset_csv(out, d);
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\r')) --last;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw ConfigError("dataset CSV: bad number '" + s + "' on line " + std::to_string(line_no));
  return v;
}

}  // namespace

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset CSV: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  if (header.size() < 2 || header[0] != "t") throw ConfigError("dataset CSV: header must be t,x1,...,xp");
  for (std::size_t k = 1; k < header.size(); ++k)
    if (header[k] != "x" + std::to_string(k)) throw ConfigError("dataset CSV: unexpected column '" + header[k] + "'");
  const std::size_t p = header.size() - 1;

  std::vector<double> values;
  std::size_t rows = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != p + 1) throw ConfigError("dataset CSV: wrong column count on line " + std::to_string(line_no));
    for (const auto& c : cells) values.push_back(parse_double(c, line_no));
    ++rows;
  }
  Dataset d;
  d.X.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p));
  d.T.resize(static_cast<Eigen::Index>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    d.T(i) = values[i * (p + 1)];
    for (std::size_t k = 0; k < p; ++k) d.X(i, k) = values[i * (p + 1) + 1 + k];
  }
  try {
    validate(d);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("dataset CSV: ") + e.what());
  }
  d.zeta = static_cast<double>(p) / static_cast<double>(rows);
  return d;
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset '" + path + "'");
  return read_dataset_csv(in);
}

nlohmann::json to_json(const ModelSpec& spec) {
  nlohmann::json j;
  j["family"] = std::string(to_string(spec.family));
  j["beta"] = std::vector<double>(spec.beta.data(), spec.beta.data() + spec.beta.size());
  j["lambda"] = spec.nuisance.lambda;
  if (spec.family == Family::ExpGammaFrailty) {
    j["theta"] = spec.nuisance.theta;
  } else {
    j["rho"] = spec.nuisance.rho;
  }
  j["S2"] = spec.signal_strength_sq();
  return j;
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  try {
    ModelSpec spec;
    spec.family = family_from_string(j.at("family").get<std::string>());
    const auto beta = j.at("beta").get<std::vector<double>>();
    spec.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    spec.nuisance.lambda = j.at("lambda").get<double>();
    if (spec.family == Family::ExpGammaFrailty) {
      spec.nuisance.theta = j.at("theta").get<double>();
    } else {
      spec.nuisance.rho = j.at("rho").get<double>();
    }
    for (const auto& [key, _] : j.items())
      if (key != "family" && key != "beta" && key != "lambda" && key != "theta" && key != "rho" && key != "S2")
        throw ConfigError("model spec: unknown field '" + key + "'");
    validate(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model spec: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("model spec: ") + e.what());
  }
}

}  // namespace overfit::models
