#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace msr::thermo {

inline constexpr double gas_constant = 8.314472;      // J/(mol*K)
inline constexpr double reference_pressure = 101325.0;  // Pa

enum class Species { CH4 = 0, H2O, H2, CO, CO2 };
inline constexpr std::size_t species_count = 5;

std::string_view to_string(Species s);

enum class Reaction { MSRR, WGSR };

std::string_view to_string(Reaction r);

/// Stoichiometric coefficients indexed by Species.
using Stoichiometry = std::array<int, species_count>;

Stoichiometry stoichiometry(Reaction r);

/// Net change in gas moles, sum of the coefficients.
int mole_change(Reaction r);

/// One Shomate fit valid on [t_min, t_max] K.
struct ShomateRange {
  double t_min = 0.0;
  double t_max = 0.0;
  std::array<double, 8> coeffs{};  // A..H

  double enthalpy(double temperature) const;  // J/mol
  double entropy(double temperature) const;   // J/(mol*K)
};

/// Piecewise Shomate tables for the five reforming species.
class SpeciesThermoTable {
 public:
  /// Parses the whitespace-delimited table format (see data/thermo_shomate.dat).
  static SpeciesThermoTable parse(std::string_view text);
  static SpeciesThermoTable load(const std::filesystem::path& path);

  /// The table shipped with the library (compiled in from data/).
  static const SpeciesThermoTable& builtin();

  const std::vector<ShomateRange>& ranges(Species s) const {
    return ranges_[static_cast<std::size_t>(s)];
  }

  /// Lowest and highest temperature covered by every species.
  double t_min() const;
  double t_max() const;

  double enthalpy(Species s, double temperature) const;
  double entropy(Species s, double temperature) const;
  double gibbs(Species s, double temperature) const { 
    return enthalpy(s, temperature) - temperature * entropy(s, temperature);
  }

 private:
  const ShomateRange& lookup(Species s, double temperature) const;

  std::array<std::vector<ShomateRange>, species_count> ranges_;
};

/// Standard Gibbs energy of reaction, J/mol.
double gibbs_reaction(Reaction r, double temperature,
                      const SpeciesThermoTable& table = SpeciesThermoTable::builtin());

/// Pressure-basis equilibrium constant exp(-dG/RT) * p_ref^dn.
/// MSRR carries Pa^2; WGSR is dimensionless.
double k_equilibrium(Reaction r, double temperature, double p_ref = reference_pressure,
                     const SpeciesThermoTable& table = SpeciesThermoTable::builtin());

}  // namespace msr::thermo
