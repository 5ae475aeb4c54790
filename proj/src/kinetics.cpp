#include "msr/kinetics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "msr/equilibrium.hpp"
#include "msr/error.hpp"

namespace msr::kinetics {

void KineticParams::validate() const {
  if (!(pre_exponential > 0.0)) {
    throw DataError(fmt::format("pre-exponential constant must be > 0 (got {})", pre_exponential));
  }
  if (!(activation_energy > 0.0)) {
    throw DataError(fmt::format("activation energy must be > 0 (got {})", activation_energy));
  }
}

double rate_constant(const KineticParams& params, double temperature) {
  return params.pre_exponential *
         std::exp(-params.activation_energy / (thermo::gas_constant * temperature));
}

double reaction_rate(const KineticParams& params, const OperatingPoint& op) {
  const double total = 1.0 + op.steam_ratio + op.nitrogen_ratio + op.co2_ratio;
  const double p_methane = op.pressure / total;
  const double p_steam = op.pressure * op.steam_ratio / total;
  return op.catalyst_mass * rate_constant(params, op.temperature) *
         std::pow(p_methane, params.order_methane) * std::pow(p_steam, params.order_steam);
}

ReformingConversion kinetic_reforming_conversion(const KineticParams& params,
                                                 const OperatingPoint& op,
                                                 const equilibrium::SolverOptions& solver) {
  ReformingConversion out;
  out.unclamped = reaction_rate(params, op) / op.methane_flow;
  out.equilibrium = equilibrium::solve_equilibrium(op, solver).conv.reforming;
  out.clamped = out.unclamped > out.equilibrium;
  out.value = out.clamped ? out.equilibrium : out.unclamped;
  return out;
}

double shift_extent(double reforming, double steam_ratio, double co2_ratio, double k_shift) {
  const double x = reforming;
  if (!(x >= 0.0 && x <= 1.0) || !(steam_ratio > x) || !(k_shift > 0.0) || !(co2_ratio >= 0.0)) {
    throw DataError(fmt::format("shift_extent: invalid inputs x_st={}, SC={}, CC={}, K_sh={}", x,
                                steam_ratio, co2_ratio, k_shift));
  }
  const double lo = -std::min(co2_ratio, 3.0 * x);
  const double hi = std::min(x, steam_ratio - x);

  // (1 - K) s^2 + (3x + CC + K SC) s + 3x CC - K x (SC - x) = 0
  const double a = 1.0 - k_shift;
  const double b = 3.0 * x + co2_ratio + k_shift * steam_ratio;
  const double c = 3.0 * x * co2_ratio - k_shift * x * (steam_ratio - x);

  double s;
  if (std::abs(a) < 1e-12) {
    s = -c / b;
  } else {
    // b > 0, so this is the root that stays finite as a -> 0.
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) {
      throw NumericalError(fmt::format("shift_extent: negative discriminant {} (x_st={}, SC={}, "
                                       "CC={}, K_sh={})",
                                       disc, x, steam_ratio, co2_ratio, k_shift));
    }
    s = -2.0 * c / (b + std::sqrt(disc));
  }

  constexpr double tol = 1e-14;
  if (s < lo - tol || s > hi + tol) {
    throw NumericalError(fmt::format("shift_extent: root {} outside feasible interval [{}, {}]", s,
                                     lo, hi));
  }
  return std::clamp(s, lo, hi);
}

std::array<double, 3> OutletMoles::elements() const {
  return {ch4 + co + co2,                       // C
          4.0 * ch4 + 2.0 * h2o + 2.0 * h2,     // H
          h2o + co + 2.0 * co2};                // O
}

OutletMoles outlet_moles(const Conversions& conv, double steam_ratio, double nitrogen_ratio,
                         double co2_ratio) {
  const double x = conv.reforming;
  const double s = conv.shift;
  OutletMoles m;
  m.h2o = steam_ratio - x - s;
  m.ch4 = 1.0 - x;
  m.h2 = 3.0 * x + s;
  m.co2 = co2_ratio + s;
  m.co = x - s;
  m.n2 = nitrogen_ratio;
  constexpr double tol = -1e-12;
  if (m.h2o < tol || m.ch4 < tol || m.h2 < tol || m.co2 < tol || m.co < tol || m.n2 < 0.0) {
    throw DataError(fmt::format("negative outlet species for x_st={}, x_sh={}, SC={}, NC={}, CC={}",
                                x, s, steam_ratio, nitrogen_ratio, co2_ratio));
  }
  return m;
}

GasComposition dry_composition(const OutletMoles& moles) {
  const double h2 = std::max(moles.h2, 0.0);
  const double ch4 = std::max(moles.ch4, 0.0);
  const double co = std::max(moles.co, 0.0);
  const double co2 = std::max(moles.co2, 0.0);
  const double dry = h2 + ch4 + co + co2;
  GasComposition g;
  g.fractions = {h2 / dry, ch4 / dry, co / dry, co2 / dry};
  return g.renormalized();
}

KineticResult kinetic_composition(const KineticParams& params, const OperatingPoint& op,
                                  const equilibrium::SolverOptions& solver) {
  KineticResult out;
  out.reforming = kinetic_reforming_conversion(params, op, solver);
  const double k_shift = thermo::k_equilibrium(thermo::Reaction::WGSR, op.temperature);
  out.conversions.reforming = out.reforming.value;
  out.conversions.shift =
      shift_extent(out.reforming.value, op.steam_ratio, op.co2_ratio, k_shift);
  out.composition = dry_composition(
      outlet_moles(out.conversions, op.steam_ratio, op.nitrogen_ratio, op.co2_ratio));
  return out;
}

}  // namespace msr::kinetics
