#include <cmath>

#include "doctest.h"
#include "msr/equilibrium.hpp"
#include "msr/error.hpp"
#include "msr/kinetics.hpp"
#include "msr/random.hpp"
#include "msr/thermo.hpp"

using namespace msr;
using namespace msr::kinetics;

namespace {

// Lightly loaded kinetic reference condition.
OperatingPoint base_kinetic() {
  OperatingPoint op;
  op.temperature = 898.15;
  op.steam_ratio = 3.0;
  op.nitrogen_ratio = 3.0;
  op.methane_flow = 3.38e-5;
  op.catalyst_mass = 1.48;
  return op;
}

double shift_residual(double s, double x, double sc, double cc, double k) {
  return (cc + s) * (3.0 * x + s) - k * (x - s) * (sc - x - s);
}

// Bracketed bisection on the shift residual; independent of the closed form.
double bisect_shift(double x, double sc, double cc, double k) {
  double lo = -std::min(cc, 3.0 * x);
  double hi = std::min(x, sc - x);
  double flo = shift_residual(lo, x, sc, cc, k);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = shift_residual(mid, x, sc, cc, k);
    if ((fm <= 0.0) == (flo <= 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("rate constant") {
  const KineticParams p;
  CHECK(rate_constant(p, 898.15) == doctest::Approx(5.1179e-11).epsilon(1e-4));
  CHECK(rate_constant(p, 973.15) == doctest::Approx(1.6814e-10).epsilon(1e-4));
  KineticParams doubled = p;
  doubled.pre_exponential *= 2.0;
  CHECK(rate_constant(doubled, 950.0) == doctest::Approx(2.0 * rate_constant(p, 950.0)));
  for (double t = 500.0; t < 1500.0; t += 10.0) CHECK(rate_constant(p, t + 10.0) > rate_constant(p, t));

  KineticParams bad = p;
  bad.pre_exponential = 0.0;
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("reaction rate at inlet partial pressures") {
  const KineticParams p;
  auto op = base_kinetic();
  const double p_methane = 101325.0 / 7.0;
  CHECK(p_methane == doctest::Approx(14475.0).epsilon(1e-4));
  CHECK(reaction_rate(p, op) == doctest::Approx(1.0964e-6).epsilon(1e-4));

  op.catalyst_mass = 0.0;
  CHECK(reaction_rate(p, op) == 0.0);

  // b = 0: SC enters only through the dilution 1 + SC + NC + CC.
  auto a = base_kinetic();
  auto b = base_kinetic();
  b.steam_ratio = 2.0;
  b.nitrogen_ratio = 4.0;
  CHECK(reaction_rate(p, a) == reaction_rate(p, b));
}

TEST_CASE("kinetic reforming conversion") {
  const KineticParams p;
  SUBCASE("base kinetic condition is unclamped") {
    const auto c = kinetic_reforming_conversion(p, base_kinetic());
    CHECK(c.value == doctest::Approx(0.032438).epsilon(1e-4));
    CHECK_FALSE(c.clamped);
  }
  SUBCASE("no catalyst, no conversion") {
    auto op = base_kinetic();
    op.catalyst_mass = 0.0;
    CHECK(kinetic_reforming_conversion(p, op).value == 0.0);
  }
  SUBCASE("huge catalyst mass clamps at equilibrium") {
    auto op = base_kinetic();
    op.catalyst_mass = 1e6;
    const auto c = kinetic_reforming_conversion(p, op);
    CHECK(c.clamped);
    CHECK(c.value == equilibrium::solve_equilibrium(op).conv.reforming);
  }
  SUBCASE("nondecreasing in catalyst mass and temperature, never above equilibrium") {
    double prev = -1.0;
    for (double m = 0.0; m <= 100.0; m += 2.5) {
      auto op = base_kinetic();
      op.catalyst_mass = m;
      const auto c = kinetic_reforming_conversion(p, op);
      CHECK(c.value >= prev);
      CHECK(c.value <= c.equilibrium + 1e-12);
      prev = c.value;
    }
    prev = -1.0;
    for (double t = 773.15; t <= 1073.15; t += 10.0) {
      auto op = base_kinetic();
      op.temperature = t;
      op.catalyst_mass = 10.0;
      const auto c = kinetic_reforming_conversion(p, op);
      CHECK(c.value >= prev);
      CHECK(c.value <= c.equilibrium + 1e-12);
      prev = c.value;
    }
  }
}

TEST_CASE("shift extent") {
  SUBCASE("limits") {
    CHECK(shift_extent(0.3, 3.0, 0.0, 1e-300) == doctest::Approx(0.0));
    CHECK(shift_extent(0.0, 3.0, 0.0, 2.0) == 0.0);
  }
  SUBCASE("base kinetic condition matches bisection") {
    const double k = thermo::k_equilibrium(thermo::Reaction::WGSR, 898.15);
    const double s = shift_extent(0.0324, 3.0, 0.0, k);
    CHECK(std::abs(s - bisect_shift(0.0324, 3.0, 0.0, k)) <= 1e-10);
    CHECK(s > 0.0);
    CHECK(s < 0.0324);
  }
  SUBCASE("degenerate K = 1 branch") {
    const double s = shift_extent(0.4, 2.0, 0.0, 1.0);
    CHECK(std::abs(shift_residual(s, 0.4, 2.0, 0.0, 1.0)) < 1e-14);
  }
  SUBCASE("closed form equals bisection on random cases") {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
      const double x = rng.uniform();
      const double sc = x + rng.uniform(1e-3, 5.0);
      const double cc = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.0, 2.0);
      const double k = std::pow(10.0, rng.uniform(-3.0, 3.0));
      const double s = shift_extent(x, sc, cc, k);
      CHECK(std::abs(s - bisect_shift(x, sc, cc, k)) <= 1e-10);
    }
  }
  SUBCASE("invalid inputs") {
    CHECK_THROWS_AS(shift_extent(0.5, 0.4, 0.0, 1.0), DataError);
    CHECK_THROWS_AS(shift_extent(0.5, 3.0, 0.0, 0.0), DataError);
  }
}

TEST_CASE("outlet moles and dry composition") {
  const auto m = outlet_moles({0.5, 0.1}, 3.0, 0.0, 0.0);
  CHECK(m.h2o == doctest::Approx(2.4));
  CHECK(m.ch4 == doctest::Approx(0.5));
  CHECK(m.h2 == doctest::Approx(1.6));
  CHECK(m.co2 == doctest::Approx(0.1));
  CHECK(m.co == doctest::Approx(0.4));
  CHECK(m.ch4 + m.co + m.co2 == doctest::Approx(1.0));

  const auto g = dry_composition(m);
  CHECK(g.h2() == doctest::Approx(1.6 / 2.6));
  CHECK(g.ch4() == doctest::Approx(0.5 / 2.6));
  CHECK(g.co() == doctest::Approx(0.4 / 2.6));
  CHECK(g.co2() == doctest::Approx(0.1 / 2.6));
  CHECK(g.h2() == doctest::Approx(0.6154).epsilon(1e-4));

  const auto feed = outlet_moles({0.0, 0.0}, 2.0, 1.5, 0.0);
  CHECK(feed.ch4 == 1.0);
  CHECK(feed.h2o == 2.0);
  CHECK(feed.n2 == 1.5);
  CHECK(feed.h2 == 0.0);
  const auto gf = dry_composition(feed);
  CHECK(gf.ch4() == 1.0);
  CHECK(gf.h2() == 0.0);

  CHECK_THROWS_AS(outlet_moles({0.5, 0.6}, 3.0, 0.0, 0.0), DataError);
}

TEST_CASE("elemental balances and renormalization on random conversions") {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const double sc = rng.uniform(1.0, 4.0);
    const double cc = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.0, 1.0);
    const double nc = rng.uniform(0.0, 6.0);
    const double x = rng.uniform();
    const double s = rng.uniform(0.0, std::min(x, sc - x));
    const auto m = outlet_moles({x, s}, sc, nc, cc);
    const auto el = m.elements();
    const double inlet[3] = {1.0 + cc, 4.0 + 2.0 * sc, sc + 2.0 * cc};
    for (int e = 0; e < 3; ++e) CHECK(std::abs(el[e] - inlet[e]) <= 1e-12 * inlet[e]);
    CHECK(std::abs(dry_composition(m).sum() - 1.0) <= 1e-15);
  }
}

TEST_CASE("kinetic composition at the base kinetic condition") {
  const auto r = kinetic_composition(KineticParams{}, base_kinetic());
  CHECK(r.composition.valid());
  CHECK(r.composition.ch4() > 0.8);
  CHECK_FALSE(r.reforming.clamped);
}
