#pragma once

#include <optional>

#include "msr/types.hpp"

namespace msr::equilibrium {

/// Which form of the shift mass-action line to use. `mass_action` uses p_CO;
/// `paper` keeps the alternative p_CH4 form of the shift line for comparison runs.
enum class ShiftResidual { mass_action, paper };

ShiftResidual shift_residual_from_string(std::string_view s);

struct PartialPressures {
  double ch4 = 0.0;
  double h2o = 0.0;
  double h2 = 0.0;
  double co = 0.0;
  double co2 = 0.0;
  double n2 = 0.0;

  double total() const { return ch4 + h2o + h2 + co + co2 + n2; }
};

/// Partial pressures over the denominator 1 + SC + NC + CC + 2x.
PartialPressures partial_pressures(const Conversions& conv, double steam_ratio,
                                   double nitrogen_ratio, double co2_ratio, double pressure);

struct EquilibriumConstants {
  double reforming = 0.0;  // K_st, Pa^2
  double shift = 0.0;      // K_sh
};

EquilibriumConstants constants_at(double temperature);

/// Scaled residual pair. Each line A - B = 0 is reported as (A - B)/(A + B),
/// a dimensionless value in [-1, 1] that is zero exactly at the solution and
/// positive when the forward reaction has not yet reached equilibrium.
struct Residuals {
  double reforming = 0.0;
  double shift = 0.0;

  double norm() const;  // max norm
};

Residuals residuals(const Conversions& conv, const EquilibriumConstants& k, double steam_ratio,
                    double nitrogen_ratio, double co2_ratio, double pressure,
                    ShiftResidual form = ShiftResidual::mass_action);

Residuals residuals(const Conversions& conv, const OperatingPoint& op,
                    ShiftResidual form = ShiftResidual::mass_action);

struct SolverOptions {
  double tolerance = 1e-12;
  int max_iterations = 200;
  ShiftResidual shift_form = ShiftResidual::mass_action;
  std::optional<Conversions> warm_start;
};

struct EquilibriumSolution {
  Conversions conv;
  double residual_norm = 0.0;
  int iterations = 0;
  int multi_start_index = 0;
};

/// Damped Newton on the logarithmic mass-action system with an analytic
/// Jacobian; iterates stay strictly inside the feasible region.
EquilibriumSolution solve_equilibrium(const OperatingPoint& op, const SolverOptions& options = {});

/// Same, with explicit constants (used for limit studies).
EquilibriumSolution solve_equilibrium(const EquilibriumConstants& k, double steam_ratio,
                                      double nitrogen_ratio, double co2_ratio, double pressure,
                                      const SolverOptions& options = {});

GasComposition equilibrium_composition(const OperatingPoint& op,
                                       const SolverOptions& options = {});

}  // namespace msr::equilibrium
