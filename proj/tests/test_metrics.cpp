#include <cmath>
#include <sstream>

#include "doctest.h"
#include "msr/dataset.hpp"
#include "msr/equilibrium.hpp"
#include "msr/error.hpp"
#include "msr/metrics.hpp"
#include "msr/random.hpp"

using namespace msr;
using namespace msr::metrics;
using dataset::Input;

namespace {

Eigen::MatrixXd random_compositions(Rng& rng, int n) {
  Eigen::MatrixXd m(4, n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < 4; ++k) m(k, j) = rng.uniform(0.01, 1.0);
    m.col(j) /= m.col(j).sum();
  }
  return m;
}

std::vector<double> row(const Eigen::MatrixXd& m, int r) {
  return {m.row(r).begin(), m.row(r).end()};
}

OperatingPoint base_kinetic() {
  OperatingPoint op;
  op.steam_ratio = 3;
  op.nitrogen_ratio = 3;
  op.methane_flow = 3.38e-5;
  op.catalyst_mass = 1.48;
  return op;
}

}  // namespace

TEST_CASE("hand-computed correlations") {
  const std::vector<double> x{1, 2, 3}, y{1, 2, 4};
  CHECK(*pearson(x, y) == doctest::Approx(9.0 / std::sqrt(84.0)).epsilon(1e-14));
  CHECK(*spearman(x, y) == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<double> flat{2, 2, 2};
  CHECK_FALSE(pearson(x, flat).has_value());
  CHECK_FALSE(spearman(flat, y).has_value());
  CHECK(*pearson(x, std::vector<double>{3, 2, 1}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 2}), DataError);
}

TEST_CASE("midranks average ties") {
  const std::vector<double> x{10, 20, 20, 5, 20};
  const auto r = midranks(x);
  CHECK(r == std::vector<double>{2, 4, 4, 1, 4});
  const std::vector<double> w{1, 2, 1, 3, 1};
  // weighted: 5 has weight 3 -> ranks 1..3 (mid 2); 10 -> 4; the 20s span 5..8 (mid 6.5)
  CHECK(midranks(x, w) == std::vector<double>{4, 6.5, 6.5, 2, 6.5});
}

TEST_CASE("correlation invariances under random transforms") {
  Rng rng(17);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(30), y(30);
    for (int i = 0; i < 30; ++i) {
      x[static_cast<std::size_t>(i)] = rng.uniform(-1, 1);
      y[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + 0.3 * rng.normal();
    }
    const double a = rng.uniform(0.1, 10), b = rng.uniform(-5, 5);
    std::vector<double> affine(30), monotone(30);
    for (int i = 0; i < 30; ++i) {
      const double v = x[static_cast<std::size_t>(i)];
      affine[static_cast<std::size_t>(i)] = a * v + b;
      monotone[static_cast<std::size_t>(i)] = std::exp(3 * v) + v * v * v;
    }
    CHECK(*pearson(affine, y) == doctest::Approx(*pearson(x, y)).epsilon(1e-12));
    CHECK(*spearman(monotone, y) == doctest::Approx(*spearman(x, y)).epsilon(1e-14));
  }
}

TEST_CASE("evaluate examples") {
  Rng rng(1);
  const Eigen::MatrixXd t = random_compositions(rng, 20);
  const auto same = evaluate(t, t);
  CHECK(same.mse_mean == 0.0);
  CHECK(*same.pearson_mean == doctest::Approx(1.0));
  CHECK(*same.spearman_mean == doctest::Approx(1.0));
  CHECK(*same.spearman_pooled == doctest::Approx(1.0));

  const Eigen::MatrixXd shifted = t.array() + 0.1;
  const auto sh = evaluate(shifted, t);
  CHECK(sh.mse_mean == doctest::Approx(0.01).epsilon(1e-12));
  for (const auto& p : sh.pearson) CHECK(*p == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(evaluate(t.leftCols(2), t.leftCols(2)), DataError);
  CHECK_THROWS_AS(evaluate(t, t.leftCols(5)), DataError);

  Eigen::MatrixXd constant_co = t;
  constant_co.row(2).setConstant(0.1);
  const auto rep = evaluate(t, constant_co);
  CHECK_FALSE(rep.pearson[2].has_value());
  CHECK(rep.notes.size() == 1);
  CHECK(*rep.pearson_mean == doctest::Approx((*rep.pearson[0] + *rep.pearson[1] + *rep.pearson[3]) / 3));
}

TEST_CASE("duplicated records equal multiplicity weights") {
  Rng rng(2);
  const Eigen::MatrixXd t = random_compositions(rng, 12);
  Eigen::MatrixXd p = t + 0.05 * random_compositions(rng, 12);
  p.col(3) = p.col(4);  // ties in the predictions
  std::vector<double> w(12);
  int total = 0;
  for (auto& v : w) total += static_cast<int>(v = static_cast<double>(rng.integer(1, 4)));
  Eigen::MatrixXd pd(4, total), td(4, total);
  int c = 0;
  for (int j = 0; j < 12; ++j) {
    for (int k = 0; k < static_cast<int>(w[static_cast<std::size_t>(j)]); ++k, ++c) {
      pd.col(c) = p.col(j);
      td.col(c) = t.col(j);
    }
  }
  const auto a = evaluate(pd, td);
  const auto b = evaluate(p, t, w);
  CHECK(a.mse_mean == doctest::Approx(b.mse_mean).epsilon(1e-13));
  for (int k = 0; k < 4; ++k) {
    CHECK(*a.pearson[static_cast<std::size_t>(k)] == doctest::Approx(*b.pearson[static_cast<std::size_t>(k)]).epsilon(1e-12));
    CHECK(*a.spearman[static_cast<std::size_t>(k)] == doctest::Approx(*b.spearman[static_cast<std::size_t>(k)]).epsilon(1e-12));
  }
  CHECK(*a.spearman_pooled == doctest::Approx(*b.spearman_pooled).epsilon(1e-12));
  (void)row;
}

TEST_CASE("report formats") {
  Rng rng(3);
  const Eigen::MatrixXd t = random_compositions(rng, 10);
  const auto rep = evaluate(t, t);
  std::ostringstream out;
  write_report_csv(out, rep);
  const std::string s = out.str();
  CHECK(s.rfind("component,mse,pearson,spearman\nH2,0,1,1\n", 0) == 0);
  CHECK(s.find("pooled,,,1\n") != std::string::npos);
  CHECK(format_report(rep).find("records: 10") != std::string::npos);
}

TEST_CASE("reference sweep trends") {
  SUBCASE("temperature at the kinetic condition") {
    const auto grid = linspace(773.15, 1073.15, 13);
    const auto table = sweep(nullptr, Input::temperature, grid, base_kinetic(), {.mode = ReferenceMode::kinetic});
    REQUIRE(table.rows.size() == 13);
    for (std::size_t i = 1; i < table.rows.size(); ++i) {
      const auto& a = *table.rows[i - 1].reference;
      const auto& b = *table.rows[i].reference;
      CHECK(b.h2() > a.h2());
      CHECK(b.co() > a.co());
      CHECK(b.ch4() < a.ch4());
    }
    CHECK_FALSE(table.rows[0].ann.has_value());
  }
  SUBCASE("flow at an equilibrium condition") {
    OperatingPoint op;
    op.temperature = 973.15;
    op.steam_ratio = 2;
    op.nitrogen_ratio = 0;
    op.catalyst_mass = 5.03;
    const auto grid = linspace(1e-5, 2e-4, 9);
    const auto table = sweep(nullptr, Input::methane_flow, grid, op, {.mode = ReferenceMode::equilibrium});
    for (const auto& r : table.rows) CHECK(r.reference->fractions == table.rows[0].reference->fractions);
  }
  SUBCASE("regime rule leaves the band empty") {
    OperatingPoint op = base_kinetic();
    op.temperature = 973.15;
    std::vector<double> grid;
    for (int i = 0; i < 40; ++i) grid.push_back(0.05 * std::pow(1.2, i));
    const auto table = sweep(nullptr, Input::catalyst_mass, grid, op);
    int band = 0, eq = 0;
    const auto plateau = equilibrium::equilibrium_composition(op);
    for (const auto& r : table.rows) {
      if (r.regime == Regime::transition) {
        ++band;
        CHECK_FALSE(r.reference.has_value());
      }
      if (r.regime == Regime::equilibrium) {
        ++eq;
        for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(r.reference->fractions[k] - plateau.fractions[k]) <= 1e-9);
      }
    }
    CHECK(band > 0);
    CHECK(eq > 0);
  }
}

TEST_CASE("sweep input checks and csv") {
  const auto op = base_kinetic();
  const std::vector<double> bad{800, 800, 900};
  CHECK_THROWS_AS(sweep(nullptr, Input::temperature, bad, op), UsageError);
  const std::vector<double> one{900};
  const auto table = sweep(nullptr, Input::temperature, one, op);
  std::ostringstream out;
  write_sweep_csv(out, table);
  std::string header, line;
  std::istringstream in(out.str());
  std::getline(in, header);
  CHECK(header ==
        "vary_name,vary_value,y_H2_ann,y_CH4_ann,y_CO_ann,y_CO2_ann,y_H2_ref,y_CH4_ref,y_CO_ref,y_CO2_ref,regime");
  std::getline(in, line);
  CHECK(line.rfind("T,900,,,,,", 0) == 0);
  CHECK(line.substr(line.rfind(',') + 1) == "kinetic");
  CHECK_FALSE(std::getline(in, line));
  CHECK(linspace(1, 2, 1) == std::vector<double>{1});
  CHECK_THROWS_AS(reference_mode_from_string("both"), UsageError);
}

TEST_CASE("sweep with a network reports compositions") {
  neural::Network net = neural::Network::zeros({3});
  net.scaler = dataset::Scaler({773.15, 0.1, 1, 0, 1e-5}, {1073.15, 20, 4, 6, 2e-4});
  const auto grid = linspace(700, 900, 5);
  const auto table = sweep(&net, Input::temperature, grid, base_kinetic());
  for (const auto& r : table.rows) CHECK(std::abs(r.ann->sum() - 1.0) <= 1e-12);
  REQUIRE(table.warnings.size() == 1);
  CHECK(table.warnings[0].find("2 of 5") != std::string::npos);
}

TEST_CASE("smoothness probe") {
  const dataset::Inputs base{900, 1.48, 3, 3, 3.38e-5};
  const auto grid = linspace(800, 1000, 21);
  Predictor constant = [](const dataset::Inputs&) {
    GasComposition g;
    g.fractions = {0.7, 0.1, 0.1, 0.1};
    return g;
  };
  CHECK(smoothness_probe(constant, Input::temperature, grid, base).max == 0.0);

  Predictor step = [](const dataset::Inputs& x) {
    GasComposition g;
    g.fractions = x[0] < 905 ? std::array<double, 4>{0.7, 0.1, 0.1, 0.1} : std::array<double, 4>{0.6, 0.2, 0.1, 0.1};
    return g;
  };
  CHECK(smoothness_probe(step, Input::temperature, grid, base).max > 1e-3);

  Rng rng(6);
  neural::Network net = neural::Network::zeros({6, 8, 6});
  Eigen::VectorXd p(net.parameter_count());
  for (auto& v : p) v = rng.uniform(-2, 2);
  net.unflatten(p);
  net.scaler = dataset::Scaler({773.15, 0.1, 1, 0, 1e-5}, {1073.15, 20, 4, 6, 2e-4});
  const auto coarse = smoothness_probe(net, Input::temperature, linspace(850, 950, 33), base).max;
  const auto fine = smoothness_probe(net, Input::temperature, linspace(850, 950, 65), base).max;
  CHECK(std::isfinite(coarse));
  CHECK(fine / coarse == doctest::Approx(0.5).epsilon(0.2));

  CHECK_THROWS_AS(smoothness_probe(constant, Input::temperature, linspace(0, 1, 15), base), UsageError);
}
