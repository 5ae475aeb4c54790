#include "msr/equilibrium.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "msr/error.hpp"
#include "msr/kinetics.hpp"
#include "msr/thermo.hpp"

namespace msr::equilibrium {
namespace {

using real = long double;

// Species moles as affine functions of (x, y): n = base + dx*x + dy*y.
struct Affine {
  real base, dx, dy;
  real at(real x, real y) const { return base + dx * x + dy * y; }
};

struct System {
  std::array<Affine, 5> species;  // CH4, H2O, H2, CO, CO2
  Affine denominator;
  real log_k_reforming;  // ln(K_st / P^2)
  real log_k_shift;
  ShiftResidual form;
};

enum : std::size_t { kCH4, kH2O, kH2, kCO, kCO2 };

System make_system(const EquilibriumConstants& k, double sc, double nc, double cc, double p,
                   ShiftResidual form) {
  System s;
  s.species[kCH4] = {1.0L, -1.0L, 0.0L};
  s.species[kH2O] = {static_cast<real>(sc), -1.0L, -1.0L};
  s.species[kH2] = {0.0L, 3.0L, 1.0L};
  s.species[kCO] = {0.0L, 1.0L, -1.0L};
  s.species[kCO2] = {static_cast<real>(cc), 0.0L, 1.0L};
  s.denominator = {1.0L + static_cast<real>(sc) + static_cast<real>(nc) + static_cast<real>(cc),
                   2.0L, 0.0L};
  s.log_k_reforming = std::log(static_cast<real>(k.reforming)) - 2.0L * std::log(static_cast<real>(p));
  s.log_k_shift = std::log(static_cast<real>(k.shift));
  s.form = form;
  return s;
}

bool interior(const System& s, real x, real y) {
  for (const auto& a : s.species) {
    if (!(a.at(x, y) > 0.0L)) return false;
  }
  return true;
}

// Log-form residuals G = ln(A) - ln(B) and their Jacobian.
struct LogEval {
  std::array<real, 2> g;
  std::array<std::array<real, 2>, 2> jac;
};

LogEval evaluate(const System& s, real x, real y) {
  std::array<real, 5> n, inv;
  for (std::size_t i = 0; i < 5; ++i) {
    n[i] = s.species[i].at(x, y);
    inv[i] = 1.0L / n[i];
  }
  const real d = s.denominator.at(x, y);
  LogEval e;
  // ln(K/P^2) + ln CH4 + ln H2O - ln CO - 3 ln H2 + 2 ln d
  e.g[0] = s.log_k_reforming + std::log(n[kCH4]) + std::log(n[kH2O]) - std::log(n[kCO]) -
           3.0L * std::log(n[kH2]) + 2.0L * std::log(d);
  const real first = s.form == ShiftResidual::mass_action ? std::log(n[kCO]) : std::log(n[kCH4]);
  e.g[1] = s.log_k_shift + first + std::log(n[kH2O]) - std::log(n[kCO2]) - std::log(n[kH2]);

  auto dlog = [&](std::size_t i, bool wrt_y) {
    return (wrt_y ? s.species[i].dy : s.species[i].dx) * inv[i];
  };
  for (int j = 0; j < 2; ++j) {
    const bool wy = j == 1;
    e.jac[0][j] = dlog(kCH4, wy) + dlog(kH2O, wy) - dlog(kCO, wy) - 3.0L * dlog(kH2, wy) +
                  2.0L * (wy ? s.denominator.dy : s.denominator.dx) / d;
    const real df = s.form == ShiftResidual::mass_action ? dlog(kCO, wy) : dlog(kCH4, wy);
    e.jac[1][j] = df + dlog(kH2O, wy) - dlog(kCO2, wy) - dlog(kH2, wy);
  }
  return e;
}

real merit(const LogEval& e) { return 0.5L * (e.g[0] * e.g[0] + e.g[1] * e.g[1]); }

// (A - B)/(A + B) = tanh((ln A - ln B)/2)
real scaled(real g) { return std::tanh(0.5L * g); }

struct Attempt {
  real x = 0.0L, y = 0.0L;
  real residual = std::numeric_limits<real>::infinity();
  int iterations = 0;
  bool converged = false;
};

Attempt newton(const System& s, real x, real y, double tolerance, int max_iterations) {
  Attempt at;
  at.x = x;
  at.y = y;
  LogEval e = evaluate(s, x, y);
  for (int it = 0; it < max_iterations; ++it) {
    at.residual = std::max(std::abs(scaled(e.g[0])), std::abs(scaled(e.g[1])));
    at.iterations = it;
    if (at.residual <= tolerance) {
      at.converged = true;
      return at;
    }
    const real det = e.jac[0][0] * e.jac[1][1] - e.jac[0][1] * e.jac[1][0];
    if (!std::isfinite(det) || det == 0.0L) return at;
    const real dx = -(e.jac[1][1] * e.g[0] - e.jac[0][1] * e.g[1]) / det;
    const real dy = -(-e.jac[1][0] * e.g[0] + e.jac[0][0] * e.g[1]) / det;

    // Largest step keeping every species above 0.5% of its current amount.
    real alpha = 1.0L;
    for (const auto& a : s.species) {
      const real n = a.at(at.x, at.y);
      const real dn = a.dx * dx + a.dy * dy;
      if (dn < 0.0L) alpha = std::min(alpha, 0.995L * n / -dn);
    }

    const real m0 = merit(e);
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      const real xn = at.x + alpha * dx;
      const real yn = at.y + alpha * dy;
      if (interior(s, xn, yn)) {
        LogEval en = evaluate(s, xn, yn);
        if (merit(en) <= (1.0L - 1e-4L * alpha) * m0 || merit(en) == 0.0L) {
          at.x = xn;
          at.y = yn;
          e = en;
          accepted = true;
          break;
        }
      }
      alpha *= 0.5L;
    }
    if (!accepted) {
      at.residual = std::max(std::abs(scaled(e.g[0])), std::abs(scaled(e.g[1])));
      at.converged = at.residual <= tolerance;
      return at;
    }
  }
  at.residual = std::max(std::abs(scaled(e.g[0])), std::abs(scaled(e.g[1])));
  at.iterations = max_iterations;
  at.converged = at.residual <= tolerance;
  return at;
}

// Pulls an initial guess strictly inside the feasible region.
std::pair<real, real> feasible_guess(const System& s, real x, real y, double sc) {
  x = std::clamp(x, 1e-6L, 1.0L - 1e-6L);
  y = std::clamp(y, 1e-6L * x, x * (1.0L - 1e-6L));
  const real budget = static_cast<real>(sc) * 0.99L;
  if (x + y >= budget) {
    const real f = budget / (x + y);
    x *= f;
    y *= f;
  }
  if (!interior(s, x, y)) {
    x = std::min<real>(0.5L * static_cast<real>(sc), 0.5L);
    y = 0.25L * x;
  }
  return {x, y};
}

}  // namespace

ShiftResidual shift_residual_from_string(std::string_view s) {
  if (s == "mass-action") return ShiftResidual::mass_action;
  if (s == "paper") return ShiftResidual::paper;
  throw UsageError(fmt::format("unknown shift residual form '{}' (expected mass-action|paper)", s));
}

PartialPressures partial_pressures(const Conversions& conv, double steam_ratio,
                                   double nitrogen_ratio, double co2_ratio, double pressure) {
  const auto m = kinetics::outlet_moles(conv, steam_ratio, nitrogen_ratio, co2_ratio);
  const double d = 1.0 + steam_ratio + nitrogen_ratio + co2_ratio + 2.0 * conv.reforming;
  const double f = pressure / d;
  return {m.ch4 * f, m.h2o * f, m.h2 * f, m.co * f, m.co2 * f, m.n2 * f};
}

EquilibriumConstants constants_at(double temperature) {
  return {thermo::k_equilibrium(thermo::Reaction::MSRR, temperature),
          thermo::k_equilibrium(thermo::Reaction::WGSR, temperature)};
}

double Residuals::norm() const { return std::max(std::abs(reforming), std::abs(shift)); }

Residuals residuals(const Conversions& conv, const EquilibriumConstants& k, double steam_ratio,
                    double nitrogen_ratio, double co2_ratio, double pressure,
                    ShiftResidual form) {
  const auto p = partial_pressures(conv, steam_ratio, nitrogen_ratio, co2_ratio, pressure);
  auto ratio = [](double a, double b) { return a + b > 0.0 ? (a - b) / (a + b) : 0.0; };
  const double p2 = pressure * pressure;
  // Divide each factor by P first so nothing overflows.
  const double a1 = (k.reforming / p2) * (p.ch4 / pressure) * (p.h2o / pressure);
  const double b1 = (p.co / pressure) * std::pow(p.h2 / pressure, 3);
  const double first = form == ShiftResidual::mass_action ? p.co : p.ch4;
  const double a2 = k.shift * (first / pressure) * (p.h2o / pressure);
  const double b2 = (p.co2 / pressure) * (p.h2 / pressure);
  return {ratio(a1, b1), ratio(a2, b2)};
}

Residuals residuals(const Conversions& conv, const OperatingPoint& op, ShiftResidual form) {
  return residuals(conv, constants_at(op.temperature), op.steam_ratio, op.nitrogen_ratio,
                   op.co2_ratio, op.pressure, form);
}

EquilibriumSolution solve_equilibrium(const EquilibriumConstants& k, double steam_ratio,
                                      double nitrogen_ratio, double co2_ratio, double pressure,
                                      const SolverOptions& options) {
  if (!(k.reforming > 0.0) || !(k.shift > 0.0) || !std::isfinite(k.reforming) ||
      !std::isfinite(k.shift)) {
    throw NumericalError(fmt::format("equilibrium constants must be finite and positive (K_st={}, "
                                     "K_sh={})",
                                     k.reforming, k.shift));
  }
  const System sys = make_system(k, steam_ratio, nitrogen_ratio, co2_ratio, pressure,
                                 options.shift_form);

  struct Start {
    real x, y;
    int index;
  };
  std::vector<Start> starts;
  if (options.warm_start) {
    starts.push_back({options.warm_start->reforming, options.warm_start->shift, 3});
  }
  starts.push_back({0.1L, 0.05L, 0});
  starts.push_back({0.5L, 0.1L, 1});
  starts.push_back({0.9L, 0.2L, 2});

  Attempt best;
  int best_index = -1;
  int total_iterations = 0;
  for (const auto& st : starts) {
    const auto [x0, y0] = feasible_guess(sys, st.x, st.y, steam_ratio);
    Attempt at = newton(sys, x0, y0, options.tolerance, options.max_iterations);
    total_iterations += at.iterations;
    if (at.residual < best.residual || best_index < 0) {
      best = at;
      best_index = st.index;
    }
    if (at.converged) break;
  }
  if (!best.converged) {
    throw NumericalError(fmt::format("equilibrium solver did not converge (best scaled residual {} "
                                     "at x={}, y={})",
                                     static_cast<double>(best.residual),
                                     static_cast<double>(best.x), static_cast<double>(best.y)));
  }

  EquilibriumSolution sol;
  sol.conv = {static_cast<double>(best.x), static_cast<double>(best.y)};
  sol.residual_norm = residuals(sol.conv, k, steam_ratio, nitrogen_ratio, co2_ratio, pressure,
                                options.shift_form)
                          .norm();
  sol.iterations = total_iterations;
  sol.multi_start_index = best_index;
  return sol;
}

EquilibriumSolution solve_equilibrium(const OperatingPoint& op, const SolverOptions& options) {
  op.validate();
  return solve_equilibrium(constants_at(op.temperature), op.steam_ratio, op.nitrogen_ratio,
                           op.co2_ratio, op.pressure, options);
}

GasComposition equilibrium_composition(const OperatingPoint& op, const SolverOptions& options) {
  const auto sol = solve_equilibrium(op, options);
  return kinetics::dry_composition(
      kinetics::outlet_moles(sol.conv, op.steam_ratio, op.nitrogen_ratio, op.co2_ratio));
}

}  // namespace msr::equilibrium
