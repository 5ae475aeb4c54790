#include "msr/types.hpp"

#include <cmath>

#include <fmt/format.h>

#include "msr/error.hpp"

namespace msr {

void OperatingPoint::validate() const {
  auto require = [](bool ok, const char* what, double v) {
    if (!ok || std::isnan(v)) throw DataError(fmt::format("invalid operating point: {} (got {})", what, v));
  };
  require(temperature > 0.0, "temperature must be > 0 K", temperature);
  require(pressure > 0.0, "pressure must be > 0 Pa", pressure);
  require(steam_ratio > 0.0, "steam-to-methane ratio must be > 0", steam_ratio);
  require(nitrogen_ratio >= 0.0, "nitrogen-to-methane ratio must be >= 0", nitrogen_ratio);
  require(co2_ratio >= 0.0, "CO2-to-methane ratio must be >= 0", co2_ratio);
  require(methane_flow > 0.0, "methane flow must be > 0 mol/s", methane_flow);
  require(catalyst_mass >= 0.0, "catalyst mass must be >= 0 g", catalyst_mass);
}

bool GasComposition::valid(double tol) const {
  for (double f : fractions) {
    if (!(f >= 0.0) || !std::isfinite(f)) return false;
  }
  return std::abs(sum() - 1.0) <= tol;
}

GasComposition GasComposition::renormalized() const {
  const double s = sum();
  GasComposition out = *this;
  for (double& f : out.fractions) f /= s;
  return out;
}

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::kinetic: return "kinetic";
    case Regime::equilibrium: return "equilibrium";
    case Regime::transition: return "transition";
    case Regime::unknown: return "unknown";
  }
  return "unknown";
}

Regime regime_from_string(std::string_view s) {
  if (s == "kinetic") return Regime::kinetic;
  if (s == "equilibrium") return Regime::equilibrium;
  if (s == "transition") return Regime::transition;
  if (s == "unknown" || s.empty()) return Regime::unknown;
  throw DataError(fmt::format("unknown regime '{}'", s));
}

}  // namespace msr
