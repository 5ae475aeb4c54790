#include "msr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "msr/equilibrium.hpp"
#include "msr/error.hpp"

namespace msr::metrics {

namespace {

double weight_at(std::span<const double> w, std::size_t i) { return w.empty() ? 1.0 : w[i]; }

void check_sizes(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  if (x.size() != y.size() || (!w.empty() && w.size() != x.size())) {
    throw DataError("correlation inputs differ in length");
  }
}

// Exact test; rounding in the mean would leave a tiny spurious variance.
bool constant(std::span<const double> v, std::span<const double> w) {
  std::optional<double> first;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(weight_at(w, i) > 0.0)) continue;
    if (!first) first = v[i];
    else if (v[i] != *first) return false;
  }
  return true;
}

std::optional<double> mean_of(const PerComponent& values) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

std::string cell(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); }

}  // namespace

std::optional<double> pearson(std::span<const double> x, std::span<const double> y,
                              std::span<const double> w) {
  check_sizes(x, y, w);
  if (constant(x, w) || constant(y, w)) return std::nullopt;
  double sw = 0.0, mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double wi = weight_at(w, i);
    sw += wi;
    mx += wi * x[i];
    my += wi * y[i];
  }
  if (!(sw > 0.0)) return std::nullopt;
  mx /= sw;
  my /= sw;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double wi = weight_at(w, i);
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += wi * dx * dx;
    syy += wi * dy * dy;
    sxy += wi * dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> midranks(std::span<const double> x, std::span<const double> w) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> rank(x.size());
  double before = 0.0;  // total weight ranked so far
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double group = 0.0;
    while (j < order.size() && x[order[j]] == x[order[i]]) group += weight_at(w, order[j++]);
    const double r = before + (group + 1.0) / 2.0;
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = r;
    before += group;
    i = j;
  }
  return rank;
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y,
                               std::span<const double> w) {
  check_sizes(x, y, w);
  const auto rx = midranks(x, w);
  const auto ry = midranks(y, w);
  return pearson(rx, ry, w);
}

EvalReport evaluate(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& target,
                    std::span<const double> weights) {
  constexpr int k = static_cast<int>(GasComposition::size);
  if (predicted.rows() != k || target.rows() != k || predicted.cols() != target.cols()) {
    throw DataError("prediction and target shapes differ");
  }
  const auto n = static_cast<std::size_t>(predicted.cols());
  if (!weights.empty() && weights.size() != n) throw DataError("one weight per record expected");
  if (n < 3) throw DataError(fmt::format("evaluation needs at least 3 records, got {}", n));

  EvalReport rep;
  rep.n = n;
  double total_w = 0.0;
  for (std::size_t i = 0; i < n; ++i) total_w += weight_at(weights, i);

  std::vector<double> p(n), t(n), pooled_p, pooled_t, pooled_w;
  pooled_p.reserve(k * n);
  pooled_t.reserve(k * n);
  for (int c = 0; c < k; ++c) {
    double se = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = predicted(c, static_cast<Eigen::Index>(i));
      t[i] = target(c, static_cast<Eigen::Index>(i));
      se += weight_at(weights, i) * (p[i] - t[i]) * (p[i] - t[i]);
    }
    const auto cu = static_cast<std::size_t>(c);
    rep.mse[cu] = se / total_w;
    rep.pearson[cu] = pearson(p, t, weights);
    rep.spearman[cu] = spearman(p, t, weights);
    if (!rep.pearson[cu]) {
      rep.notes.push_back(fmt::format("{}: zero variance, correlation left out of the mean",
                                      GasComposition::names[cu]));
    }
    pooled_p.insert(pooled_p.end(), p.begin(), p.end());
    pooled_t.insert(pooled_t.end(), t.begin(), t.end());
    if (!weights.empty()) pooled_w.insert(pooled_w.end(), weights.begin(), weights.end());
  }
  rep.mse_mean = std::accumulate(rep.mse.begin(), rep.mse.end(), 0.0) / k;
  rep.pearson_mean = mean_of(rep.pearson);
  rep.spearman_mean = mean_of(rep.spearman);
  rep.spearman_pooled = spearman(pooled_p, pooled_t, pooled_w);
  return rep;
}

EvalReport evaluate(const neural::Network& net, const std::vector<dataset::DataRecord>& records,
                    std::span<const double> weights) {
  const auto batch = neural::Batch::from(records, net.scaler);
  return evaluate(net.forward(batch.inputs), batch.targets, weights);
}

std::string format_report(const EvalReport& r) {
  auto num = [](const std::optional<double>& v) {
    return v ? fmt::format("{:.6f}", *v) : std::string("n/a");
  };
  std::string out = fmt::format("records: {}\n{:<5} {:>12} {:>10} {:>10}\n", r.n, "", "MSE",
                                "Pearson", "Spearman");
  for (std::size_t c = 0; c < GasComposition::size; ++c) {
    out += fmt::format("{:<5} {:>12.4e} {:>10} {:>10}\n", GasComposition::names[c], r.mse[c],
                       num(r.pearson[c]), num(r.spearman[c]));
  }
  out += fmt::format("{:<5} {:>12.4e} {:>10} {:>10}\n", "mean", r.mse_mean, num(r.pearson_mean),
                     num(r.spearman_mean));
  out += fmt::format("pooled Spearman: {}\n", num(r.spearman_pooled));
  for (const auto& n : r.notes) out += fmt::format("note: {}\n", n);
  return out;
}

void write_report_csv(std::ostream& out, const EvalReport& r) {
  out << "component,mse,pearson,spearman\n";
  for (std::size_t c = 0; c < GasComposition::size; ++c) {
    out << fmt::format("{},{},{},{}\n", GasComposition::names[c], r.mse[c], cell(r.pearson[c]),
                       cell(r.spearman[c]));
  }
  out << fmt::format("mean,{},{},{}\n", r.mse_mean, cell(r.pearson_mean), cell(r.spearman_mean));
  out << fmt::format("pooled,,,{}\n", cell(r.spearman_pooled));
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& r) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  write_report_csv(out, r);
}

// ---------------------------------------------------------------------------

ReferenceMode reference_mode_from_string(std::string_view s) {
  if (s == "regime-rule") return ReferenceMode::regime_rule;
  if (s == "kinetic") return ReferenceMode::kinetic;
  if (s == "equilibrium") return ReferenceMode::equilibrium;
  throw UsageError(fmt::format("unknown reference mode '{}' (regime-rule, kinetic, equilibrium)", s));
}

std::vector<double> linspace(double from, double to, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = n == 1 ? from : from + (to - from) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  if (n > 1) out.back() = to;
  return out;
}

SweepTable sweep(const neural::Network* net, dataset::Input vary, std::span<const double> grid,
                 const OperatingPoint& fixed, const SweepOptions& options) {
  if (grid.empty()) throw UsageError("sweep grid is empty");
  const bool up = grid.size() < 2 || grid[1] > grid[0];
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (up ? !(grid[i] > grid[i - 1]) : !(grid[i] < grid[i - 1])) {
      throw UsageError("sweep grid must be strictly monotone");
    }
  }

  SweepTable table;
  table.vary = vary;
  table.fixed = fixed;
  std::size_t outside = 0;
  for (double v : grid) {
    SweepRow row;
    row.value = v;
    OperatingPoint op = fixed;
    dataset::set_input(op, vary, v);
    op.validate();
    const dataset::Inputs raw{op.temperature, op.catalyst_mass, op.steam_ratio, op.nitrogen_ratio,
                              op.methane_flow};
    if (net) {
      if (!net->scaler.contains(raw, 1e-9)) ++outside;
      row.ann = net->predict(raw);
    }
    try {
      const auto ref = dataset::reference_point(op, options.params, options.thresholds, options.solver);
      row.regime = ref.regime;
      if (options.with_reference) {
        switch (options.mode) {
          case ReferenceMode::regime_rule: row.reference = ref.composition; break;
          case ReferenceMode::kinetic:
            row.reference = kinetics::kinetic_composition(options.params, op, options.solver).composition;
            break;
          case ReferenceMode::equilibrium:
            row.reference = equilibrium::equilibrium_composition(op, options.solver);
            break;
        }
      }
    } catch (const NumericalError& e) {
      row.regime = Regime::unknown;
      row.reference.reset();
      table.warnings.push_back(fmt::format("{} = {}: {}", dataset::input_name(vary), v, e.what()));
    }
    table.rows.push_back(row);
  }
  if (outside > 0) {
    table.warnings.push_back(
        fmt::format("{} of {} points lie outside the training hull", outside, grid.size()));
  }
  return table;
}

void write_sweep_csv(std::ostream& out, const SweepTable& table) {
  out << "vary_name,vary_value";
  for (auto suffix : {"ann", "ref"}) {
    for (auto name : GasComposition::names) out << fmt::format(",y_{}_{}", name, suffix);
  }
  out << ",regime\n";
  auto cells = [&](const std::optional<GasComposition>& g) {
    std::string s;
    for (std::size_t c = 0; c < GasComposition::size; ++c) {
      s += g ? fmt::format(",{}", g->fractions[c]) : std::string(",");
    }
    return s;
  };
  for (const auto& row : table.rows) {
    out << fmt::format("{},{}{}{},{}\n", dataset::input_name(table.vary), row.value, cells(row.ann),
                       cells(row.reference), to_string(row.regime));
  }
}

void write_sweep_csv(const std::filesystem::path& path, const SweepTable& table) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  write_sweep_csv(out, table);
}

// ---------------------------------------------------------------------------

SmoothnessReport smoothness_probe(const Predictor& f, dataset::Input axis,
                                  std::span<const double> grid, const dataset::Inputs& base) {
  if (grid.size() < 16) throw UsageError("smoothness probe needs at least 16 grid points");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw UsageError("smoothness grid must be strictly increasing");
  }
  const auto a = static_cast<std::size_t>(axis);
  std::vector<GasComposition> y;
  y.reserve(grid.size());
  for (double v : grid) {
    dataset::Inputs x = base;
    x[a] = v;
    y.push_back(f(x));
  }
  SmoothnessReport rep;
  for (std::size_t c = 0; c < GasComposition::size; ++c) {
    std::vector<double> d;
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
      d.push_back((y[i + 1].fractions[c] - y[i - 1].fractions[c]) / (grid[i + 1] - grid[i - 1]));
    }
    double jump = 0.0;
    for (std::size_t i = 1; i < d.size(); ++i) jump = std::max(jump, std::abs(d[i] - d[i - 1]));
    rep.max_jump[c] = jump;
    rep.max = std::max(rep.max, jump);
  }
  return rep;
}

SmoothnessReport smoothness_probe(const neural::Network& net, dataset::Input axis,
                                  std::span<const double> grid, const dataset::Inputs& base) {
  return smoothness_probe([&](const dataset::Inputs& raw) { return net.predict(raw); }, axis, grid,
                          base);
}

}  // namespace msr::metrics
