#include <algorithm>
#include <atomic>
#include <boost/algorithm/string/split.hpp>
#include <boost/algorithm/string/trim.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "interp.hpp"
#include "overfit/correction/correction.hpp"
#include "overfit/error.hpp"
#include "overfit/models/io.hpp"

namespace overfit::correction {

namespace detail {

MonotoneInterp::MonotoneInterp(std::vector<double> x, std::vector<double> y) {
  if (x.size() < 2 || x.size() != y.size()) throw DomainError("MonotoneInterp: needs two or more matching points");
  lo_ = x.front();
  hi_ = x.back();
  for (std::size_t i = 1; i < x.size(); ++i)
    if (!(x[i] > x[i - 1])) throw DomainError("MonotoneInterp: abscissae must be strictly increasing");
  if (x.size() >= 4) {
    pchip_ = std::make_shared<boost::math::interpolators::pchip<std::vector<double>>>(std::move(x), std::move(y));
  } else {
    x_ = std::move(x);
    y_ = std::move(y);
  }
}

double MonotoneInterp::operator()(double t) const {
  if (!(t >= lo_ && t <= hi_)) throw DomainError("MonotoneInterp: argument outside the tabulated range");
  if (pchip_) return (*pchip_)(t);
  const auto it = std::upper_bound(x_.begin(), x_.end(), t);
  const std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - x_.begin(), 1), x_.size() - 1);
  const double s = (t - x_[i - 1]) / (x_[i] - x_[i - 1]);
  return y_[i - 1] + s * (y_[i] - y_[i - 1]);
}

}  // namespace detail

namespace {

bool is_frailty(models::Family f) { return f == models::Family::ExpGammaFrailty; }

void check_curve(models::Family family, const CorrectionCurve& c) {
  const std::size_t n = c.zeta.size();
  if (n == 0) throw DomainError("CorrectionTable: empty curve");
  if (c.f.size() != n || c.g.size() != n || c.converged.size() != n)
    throw DomainError("CorrectionTable: curve columns differ in length");
  if (is_frailty(family) && c.theta_star.size() != n) throw DomainError("CorrectionTable: frailty curve needs theta*");
  if (is_frailty(family) != c.theta0.has_value())
    throw DomainError("CorrectionTable: theta0 is required for frailty curves and only for them");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(c.zeta[i] > 0.0 && c.zeta[i] < 1.0)) throw DomainError("CorrectionTable: zeta must lie in (0, 1)");
    if (i > 0 && !(c.zeta[i] > c.zeta[i - 1])) throw DomainError("CorrectionTable: zeta grid must be increasing");
    if (c.converged[i] && !(c.f[i] > 0.0)) throw DomainError("CorrectionTable: f must be positive");
  }
  if (std::none_of(c.converged.begin(), c.converged.end(), [](bool b) { return b; }))
    throw DomainError("CorrectionTable: no converged point on a curve");
}

}  // namespace

CorrectionTable::CorrectionTable(models::Family family, std::vector<CorrectionCurve> curves)
    : family_(family), curves_(std::move(curves)) {
  if (curves_.empty()) throw DomainError("CorrectionTable: no curves");
  if (!is_frailty(family) && curves_.size() != 1) throw DomainError("CorrectionTable: expected a single curve");
  for (std::size_t k = 0; k < curves_.size(); ++k) {
    check_curve(family, curves_[k]);
    if (k > 0 && !(*curves_[k].theta0 > *curves_[k - 1].theta0))
      throw DomainError("CorrectionTable: theta0 values must be increasing");
  }
}

double CorrectionTable::zeta_max() const {
  double m = 1.0;
  for (const CorrectionCurve& c : curves_) {
    double last = 0.0;
    for (std::size_t i = 0; i < c.zeta.size(); ++i)
      if (c.converged[i]) last = c.zeta[i];
    m = std::min(m, last);
  }
  return m;
}

CorrectionTable::Lookup CorrectionTable::curve_at(std::size_t k, double zeta) const {
  const CorrectionCurve& c = curves_[k];
  const double theta0 = c.theta0.value_or(0.0);
  std::vector<double> x{0.0}, f{1.0}, g{0.0}, th{theta0};
  for (std::size_t i = 0; i < c.zeta.size(); ++i) {
    if (!c.converged[i]) continue;
    x.push_back(c.zeta[i]);
    f.push_back(c.f[i]);
    g.push_back(c.g[i]);
    if (c.theta0) th.push_back(c.theta_star[i]);
  }
  if (!(zeta > 0.0 && zeta <= x.back()))
    throw DomainError("CorrectionTable: zeta " + models::format_double(zeta) + " outside (0, " +
                      models::format_double(x.back()) + "]");
  Lookup out;
  out.f = detail::MonotoneInterp(x, f)(zeta);
  out.g = detail::MonotoneInterp(x, g)(zeta);
  if (c.theta0) out.theta_star = std::max(0.0, detail::MonotoneInterp(x, th)(zeta));
  // A failed grid point between the converged neighbours of zeta.
  const auto hi = std::lower_bound(x.begin(), x.end(), zeta);
  const double right = *hi, left = hi == x.begin() ? 0.0 : *(hi - 1);
  for (std::size_t i = 0; i < c.zeta.size(); ++i)
    if (!c.converged[i] && c.zeta[i] > left && c.zeta[i] < right) out.near_failed = true;
  return out;
}

CorrectionTable::Lookup CorrectionTable::at(double zeta) const {
  if (is_frailty(family_)) throw DomainError("CorrectionTable::at: frailty lookups need theta0");
  return curve_at(0, zeta);
}

CorrectionTable::Lookup CorrectionTable::at(double zeta, double theta0) const {
  if (!is_frailty(family_)) return at(zeta);
  const double lo = *curves_.front().theta0, hi = *curves_.back().theta0;
  if (!(theta0 >= lo && theta0 <= hi))
    throw DomainError("CorrectionTable: theta0 " + models::format_double(theta0) + " outside the tabulated [" +
                      models::format_double(lo) + ", " + models::format_double(hi) + "]");
  std::vector<double> t0, g, th;
  Lookup out;
  for (std::size_t k = 0; k < curves_.size(); ++k) {
    const Lookup l = curve_at(k, zeta);
    t0.push_back(*curves_[k].theta0);
    g.push_back(l.g);
    th.push_back(l.theta_star);
    out.near_failed = out.near_failed || l.near_failed;
  }
  if (t0.size() == 1) {
    out.g = g[0];
    out.theta_star = th[0];
    return out;
  }
  out.g = detail::MonotoneInterp(t0, g)(theta0);
  out.theta_star = std::max(0.0, detail::MonotoneInterp(t0, th)(theta0));
  return out;
}

std::string CorrectionTable::hash() const {
  std::ostringstream os;
  write_table_csv(os, *this);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : os.str()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

CorrectionTable build_correction_table(models::Family family, const std::vector<double>& zeta_grid,
                                       const std::vector<double>& theta0_grid, const rs::RsConfig& cfg,
                                       int threads) {
  if (zeta_grid.empty()) throw DomainError("build_correction_table: empty zeta grid");
  std::vector<std::optional<double>> theta0s;
  if (is_frailty(family)) {
    if (theta0_grid.empty()) throw DomainError("build_correction_table: frailty needs a theta0 grid");
    for (std::size_t k = 0; k < theta0_grid.size(); ++k) {
      if (!(theta0_grid[k] >= 0.0)) throw DomainError("build_correction_table: theta0 must be non-negative");
      if (k > 0 && !(theta0_grid[k] > theta0_grid[k - 1]))
        throw DomainError("build_correction_table: theta0 grid must be increasing");
      theta0s.emplace_back(theta0_grid[k]);
    }
  } else {
    if (!theta0_grid.empty()) throw DomainError("build_correction_table: theta0 grid given for a non-frailty family");
    theta0s.emplace_back();
  }

  std::vector<CorrectionCurve> curves(theta0s.size());
  auto build = [&](std::size_t k) {
    const std::vector<rs::RSSolution> sols = rs::solve_rs_sweep(family, zeta_grid, cfg, theta0s[k].value_or(0.0));
    CorrectionCurve& c = curves[k];
    c.theta0 = theta0s[k];
    for (const rs::RSSolution& s : sols) {
      c.zeta.push_back(s.zeta);
      c.f.push_back(s.f());
      c.g.push_back(s.g());
      if (c.theta0) c.theta_star.push_back(s.nuisance_star.theta);
      c.converged.push_back(s.converged);
    }
  };
  // Each worker writes only its own curves, so the table is independent of scheduling.
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < curves.size(); k = next++) {
      try {
        build(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::clamp<std::size_t>(threads < 1 ? 1 : threads, 1, curves.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return CorrectionTable(family, std::move(curves));
}

void write_table_csv(std::ostream& out, const CorrectionTable& table) {
  using models::format_double;
  const bool frailty = is_frailty(table.family());
  const std::string fam(models::to_string(table.family()));
  const std::string nan = "nan";
  out << "family,zeta,f,g" << (frailty ? ",theta0,theta_star" : "") << '\n';
  for (const CorrectionCurve& c : table.curves()) {
    for (std::size_t i = 0; i < c.zeta.size(); ++i) {
      const bool ok = c.converged[i];
      out << fam << ',' << format_double(c.zeta[i]) << ',' << (ok ? format_double(c.f[i]) : nan) << ','
          << (ok ? format_double(c.g[i]) : nan);
      if (frailty) out << ',' << format_double(*c.theta0) << ',' << (ok ? format_double(c.theta_star[i]) : nan);
      out << '\n';
    }
  }
}

void write_table_csv(const std::string& path, const CorrectionTable& table) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open " + path + " for writing");
  write_table_csv(f, table);
  if (!f) throw ConfigError("failed writing " + path);
}

CorrectionTable read_table_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("correction table: empty input");
  boost::algorithm::trim(line);
  bool frailty;
  if (line == "family,zeta,f,g") {
    frailty = false;
  } else if (line == "family,zeta,f,g,theta0,theta_star") {
    frailty = true;
  } else {
    throw ConfigError("correction table: unexpected header '" + line + "'");
  }
  const std::size_t ncol = frailty ? 6 : 4;
  std::optional<models::Family> family;
  std::vector<CorrectionCurve> curves;
  std::size_t lineno = 1;
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("correction table line " + std::to_string(lineno) + ": bad number '" + s + "'");
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    boost::algorithm::trim(line);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    boost::algorithm::split(cells, line, [](char ch) { return ch == ','; });
    if (cells.size() != ncol)
      throw ConfigError("correction table line " + std::to_string(lineno) + ": expected " + std::to_string(ncol) +
                        " fields");
    const models::Family fam = models::family_from_string(cells[0]);
    if (family && fam != *family) throw ConfigError("correction table: mixed families");
    family = fam;
    if (frailty != is_frailty(fam)) throw ConfigError("correction table: header does not match family");
    const double zeta = number(cells[1]), f = number(cells[2]), g = number(cells[3]);
    std::optional<double> theta0;
    double theta_star = 0.0;
    if (frailty) {
      theta0 = number(cells[4]);
      theta_star = number(cells[5]);
    }
    if (curves.empty() || curves.back().theta0 != theta0) {
      curves.emplace_back();
      curves.back().theta0 = theta0;
    }
    CorrectionCurve& c = curves.back();
    const bool ok = std::isfinite(f) && std::isfinite(g) && std::isfinite(theta_star);
    c.zeta.push_back(zeta);
    c.f.push_back(ok ? f : std::numeric_limits<double>::quiet_NaN());
    c.g.push_back(ok ? g : std::numeric_limits<double>::quiet_NaN());
    if (frailty) c.theta_star.push_back(ok ? theta_star : std::numeric_limits<double>::quiet_NaN());
    c.converged.push_back(ok);
  }
  if (!family) throw ConfigError("correction table: no rows");
  try {
    return CorrectionTable(*family, std::move(curves));
  } catch (const DomainError& e) {
    throw ConfigError(std::string("correction table: ") + e.what());
  }
}

CorrectionTable read_table_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path);
  return read_table_csv(f);
}

}  // namespace overfit::correction
