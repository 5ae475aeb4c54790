#pragma once

#include <array>
#include <string>
#include <string_view>

namespace msr {

/// One reactor condition.
struct OperatingPoint {
  double temperature = 898.15;   // K
  double pressure = 101325.0;    // Pa
  double steam_ratio = 3.0;      // SC, mol H2O / mol CH4
  double nitrogen_ratio = 3.0;   // NC, mol N2 / mol CH4
  double co2_ratio = 0.0;        // CC, mol CO2 / mol CH4
  double methane_flow = 3.38e-5; // mol/s
  double catalyst_mass = 1.48;   // g

  /// Throws DataError naming the first violated bound.
  void validate() const;
};

/// Reforming and shift extents per mole of inlet methane.
struct Conversions {
  double reforming = 0.0;  // x_st
  double shift = 0.0;      // x_sh
};

/// Dry, nitrogen-free mole fractions.
struct GasComposition {
  static constexpr std::size_t size = 4;
  static constexpr std::array<std::string_view, size> names{"H2", "CH4", "CO", "CO2"};

  std::array<double, size> fractions{};  // H2, CH4, CO, CO2

  double& h2() { return fractions[0]; }
  double& ch4() { return fractions[1]; }
  double& co() { return fractions[2]; }
  double& co2() { return fractions[3]; }
  double h2() const { return fractions[0]; }
  double ch4() const { return fractions[1]; }
  double co() const { return fractions[2]; }
  double co2() const { return fractions[3]; }

  double sum() const { return fractions[0] + fractions[1] + fractions[2] + fractions[3]; }

  /// Nonnegative and summing to one within `tol`.
  bool valid(double tol = 1e-9) const;

  /// Divides by the sum; the result sums to 1 up to one rounding.
  GasComposition renormalized() const;

  friend bool operator==(const GasComposition&, const GasComposition&) = default;
};

/// Operating regime of a reference-model evaluation.
enum class Regime { kinetic, equilibrium, transition, unknown };

std::string_view to_string(Regime r);
Regime regime_from_string(std::string_view s);

}  // namespace msr
