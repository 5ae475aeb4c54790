#include "msr/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "msr/error.hpp"
#include "thermo_data.inc"

namespace msr::thermo {
namespace {

constexpr std::array<std::string_view, species_count> kSpeciesNames{"CH4", "H2O", "H2", "CO",
                                                                    "CO2"};

Species species_from_name(std::string_view name, int line) {
  for (std::size_t i = 0; i < species_count; ++i) {
    if (kSpeciesNames[i] == name) return static_cast<Species>(i);
  }
  throw DataError(fmt::format("thermo table line {}: unknown species '{}'", line, name));
}

// Boundary mismatch tolerated between adjacent fits.
constexpr double kContinuityTolerance = 5e-3;

void check_table(const std::array<std::vector<ShomateRange>, species_count>& ranges) {
  for (std::size_t i = 0; i < species_count; ++i) {
    const auto& rs = ranges[i];
    const auto name = kSpeciesNames[i];
    if (rs.empty()) throw DataError(fmt::format("thermo table: no data for {}", name));
    for (std::size_t k = 0; k + 1 < rs.size(); ++k) {
      const auto& lo = rs[k];
      const auto& hi = rs[k + 1];
      if (lo.t_max != hi.t_min) {
        throw DataError(fmt::format("thermo table: {} ranges not contiguous at {} K / {} K", name,
                                    lo.t_max, hi.t_min));
      }
      const double t = lo.t_max;
      const double h1 = lo.enthalpy(t), h2 = hi.enthalpy(t);
      const double s1 = lo.entropy(t), s2 = hi.entropy(t);
      const double h_scale = std::max({std::abs(h1), std::abs(h2), 1000.0});
      if (std::abs(h1 - h2) > kContinuityTolerance * h_scale ||
          std::abs(s1 - s2) > kContinuityTolerance * std::max(std::abs(s1), std::abs(s2))) {
        throw DataError(fmt::format("thermo table: {} discontinuous at {} K", name, t));
      }
    }
    if (rs.front().t_min > 500.0 || rs.back().t_max < 1500.0) {
      throw DataError(fmt::format("thermo table: {} does not cover 500-1500 K", name));
    }
  }
}

}  // namespace

std::string_view to_string(Species s) { return kSpeciesNames[static_cast<std::size_t>(s)]; }

std::string_view to_string(Reaction r) { return r == Reaction::MSRR ? "MSRR" : "WGSR"; }

Stoichiometry stoichiometry(Reaction r) {
  // CH4, H2O, H2, CO, CO2
  if (r == Reaction::MSRR) return {-1, -1, 3, 1, 0};
  return {0, -1, 1, -1, 1};
}

int mole_change(Reaction r) {
  int dn = 0;
  for (int v : stoichiometry(r)) dn += v;
  return dn;
}

double ShomateRange::enthalpy(double temperature) const {
  const double t = temperature / 1000.0;
  const auto& [a, b, c, d, e, f, g, h] = coeffs;
  (void)g;
  (void)h;
  return 1000.0 * (a * t + b * t * t / 2.0 + c * t * t * t / 3.0 + d * t * t * t * t / 4.0 -
                   e / t + f);
}

double ShomateRange::entropy(double temperature) const {
  const double t = temperature / 1000.0;
  const auto& [a, b, c, d, e, f, g, h] = coeffs;
  (void)f;
  (void)h;
  return a * std::log(t) + b * t + c * t * t / 2.0 + d * t * t * t / 3.0 - e / (2.0 * t * t) + g;
}

SpeciesThermoTable SpeciesThermoTable::parse(std::string_view text) {
  SpeciesThermoTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string name;
    if (!(fields >> name)) continue;
    ShomateRange range;
    fields >> range.t_min >> range.t_max;
    for (double& c : range.coeffs) fields >> c;
    if (!fields) {
      throw DataError(fmt::format("thermo table line {}: expected species, T_min, T_max and 8 "
                                  "coefficients",
                                  line_no));
    }
    std::string extra;
    if (fields >> extra) {
      throw DataError(fmt::format("thermo table line {}: trailing field '{}'", line_no, extra));
    }
    if (!(range.t_max > range.t_min)) {
      throw DataError(fmt::format("thermo table line {}: empty temperature range", line_no));
    }
    table.ranges_[static_cast<std::size_t>(species_from_name(name, line_no))].push_back(range);
  }
  for (auto& rs : table.ranges_) {
    std::sort(rs.begin(), rs.end(),
              [](const ShomateRange& a, const ShomateRange& b) { return a.t_min < b.t_min; });
  }
  check_table(table.ranges_);
  return table;
}

SpeciesThermoTable SpeciesThermoTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open thermo table '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

const SpeciesThermoTable& SpeciesThermoTable::builtin() {
  static const SpeciesThermoTable table = parse(kBuiltinThermoTable);
  return table;
}

double SpeciesThermoTable::t_min() const {
  double t = 0.0;
  for (const auto& rs : ranges_) t = std::max(t, rs.front().t_min);
  return t;
}

double SpeciesThermoTable::t_max() const {
  double t = std::numeric_limits<double>::infinity();
  for (const auto& rs : ranges_) t = std::min(t, rs.back().t_max);
  return t;
}

const ShomateRange& SpeciesThermoTable::lookup(Species s, double temperature) const {
  const auto& rs = ranges(s);
  for (const auto& r : rs) {
    if (temperature >= r.t_min && temperature <= r.t_max) return r;
  }
  throw RangeError(fmt::format("temperature {} K outside the thermo table for {} ([{}, {}] K)",
                               temperature, to_string(s), rs.front().t_min, rs.back().t_max));
}

double SpeciesThermoTable::enthalpy(Species s, double temperature) const {
  return lookup(s, temperature).enthalpy(temperature);
}

double SpeciesThermoTable::entropy(Species s, double temperature) const {
  return lookup(s, temperature).entropy(temperature);
}

double gibbs_reaction(Reaction r, double temperature, const SpeciesThermoTable& table) {
  const auto nu = stoichiometry(r);
  double dg = 0.0;
  for (std::size_t i = 0; i < species_count; ++i) {
    if (nu[i] != 0) dg += nu[i] * table.gibbs(static_cast<Species>(i), temperature);
  }
  return dg;
}

double k_equilibrium(Reaction r, double temperature, double p_ref,
                     const SpeciesThermoTable& table) {
  if (!(p_ref > 0.0)) throw DataError(fmt::format("reference pressure must be > 0 (got {})", p_ref));
  const double dg = gibbs_reaction(r, temperature, table);
  return std::exp(-dg / (gas_constant * temperature)) * std::pow(p_ref, mole_change(r));
}

}  // namespace msr::thermo
