#pragma once

#include <array>

#include "msr/equilibrium.hpp"
#include "msr/thermo.hpp"
#include "msr/types.hpp"

namespace msr::kinetics {

/// Power-law rate parameters r = m_cat * A exp(-E/RT) * p_CH4^a * p_H2O^b.
struct KineticParams {
  double pre_exponential = 2.582e-4;   // mol/(g*Pa^(a+b)*s)
  double activation_energy = 115255.0; // J/mol
  double order_methane = 1.0;          // a
  double order_steam = 0.0;            // b

  void validate() const;
};

double rate_constant(const KineticParams& params, double temperature);

/// Reforming rate in mol/s, evaluated at inlet partial pressures.
double reaction_rate(const KineticParams& params, const OperatingPoint& op);

struct ReformingConversion {
  double value = 0.0;      // reported x_st
  double unclamped = 0.0;  // r_st / f_CH4
  double equilibrium = 0.0;
  bool clamped = false;
};

/// x_st = min(r_st / f_CH4, x_eq), x_eq from the equilibrium solver.
ReformingConversion kinetic_reforming_conversion(const KineticParams& params,
                                                 const OperatingPoint& op,
                                                 const equilibrium::SolverOptions& solver = {});

/// Shift extent closing (CC + s)(3x + s) = K_sh (x - s)(SC - x - s).
/// Returns the unique root on [-min(CC, 3x), min(x, SC - x)].
double shift_extent(double reforming, double steam_ratio, double co2_ratio, double k_shift);

/// Outlet moles per mole of inlet methane.
struct OutletMoles {
  double h2o = 0.0;
  double ch4 = 0.0;
  double h2 = 0.0;
  double co2 = 0.0;
  double co = 0.0;
  double n2 = 0.0;

  /// Element totals (C, H, O).
  std::array<double, 3> elements() const;
};

OutletMoles outlet_moles(const Conversions& conv, double steam_ratio, double nitrogen_ratio,
                         double co2_ratio);

/// Water- and nitrogen-free fractions of H2, CH4, CO, CO2.
GasComposition dry_composition(const OutletMoles& moles);

struct KineticResult {
  Conversions conversions;
  ReformingConversion reforming;
  GasComposition composition;
};

/// Full kinetic-regime evaluation: clamped x_st, shift closure, dry gas.
KineticResult kinetic_composition(const KineticParams& params, const OperatingPoint& op,
                                  const equilibrium::SolverOptions& solver = {});

}  // namespace msr::kinetics
