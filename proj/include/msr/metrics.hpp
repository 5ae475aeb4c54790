#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msr/dataset.hpp"
#include "msr/equilibrium.hpp"
#include "msr/kinetics.hpp"
#include "msr/neural.hpp"
#include "msr/types.hpp"

namespace msr::metrics {

/// Weighted Pearson coefficient; empty when either side has zero variance.
/// Empty weights mean unit weights.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y,
                              std::span<const double> w = {});

/// Average ranks (1-based); tied values share their mean rank. A record of
/// weight w counts as w identical copies.
std::vector<double> midranks(std::span<const double> x, std::span<const double> w = {});

/// Pearson on midranks.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y,
                               std::span<const double> w = {});

using PerComponent = std::array<std::optional<double>, GasComposition::size>;

struct EvalReport {
  std::size_t n = 0;
  std::array<double, GasComposition::size> mse{};
  double mse_mean = 0.0;
  PerComponent pearson;
  std::optional<double> pearson_mean;
  PerComponent spearman;
  std::optional<double> spearman_mean;
  std::optional<double> spearman_pooled;  // all components stacked
  std::vector<std::string> notes;
};

/// Columns are records (4 x N). Correlations need at least 3 records.
EvalReport evaluate(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& target,
                    std::span<const double> weights = {});
EvalReport evaluate(const neural::Network& net, const std::vector<dataset::DataRecord>& records,
                    std::span<const double> weights = {});

std::string format_report(const EvalReport& report);
/// One row per component plus a mean row: component,mse,pearson,spearman.
void write_report_csv(std::ostream& out, const EvalReport& report);
void write_report_csv(const std::filesystem::path& path, const EvalReport& report);

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Which reference model fills the comparison columns.
enum class ReferenceMode { regime_rule, kinetic, equilibrium };

ReferenceMode reference_mode_from_string(std::string_view s);

struct SweepRow {
  double value = 0.0;
  std::optional<GasComposition> ann;
  std::optional<GasComposition> reference;
  Regime regime = Regime::unknown;
};

struct SweepTable {
  dataset::Input vary = dataset::Input::temperature;
  OperatingPoint fixed;
  std::vector<SweepRow> rows;
  std::vector<std::string> warnings;
};

struct SweepOptions {
  bool with_reference = true;
  ReferenceMode mode = ReferenceMode::regime_rule;
  kinetics::KineticParams params;
  dataset::RegimeThresholds thresholds;
  equilibrium::SolverOptions solver;
};

/// `from`..`to` in `n` equal steps; a single point when n == 1.
std::vector<double> linspace(double from, double to, std::size_t n);

/// ANN predictions (when `net` is given) and reference compositions along one
/// input. The grid must be strictly monotone.
SweepTable sweep(const neural::Network* net, dataset::Input vary, std::span<const double> grid,
                 const OperatingPoint& fixed, const SweepOptions& options = {});

void write_sweep_csv(std::ostream& out, const SweepTable& table);
void write_sweep_csv(const std::filesystem::path& path, const SweepTable& table);

// ---------------------------------------------------------------------------
// Smoothness
// ---------------------------------------------------------------------------

using Predictor = std::function<GasComposition(const dataset::Inputs& raw)>;

struct SmoothnessReport {
  std::array<double, GasComposition::size> max_jump{};  // per component
  double max = 0.0;
};

/// Central-difference first derivatives along `axis` at the interior grid
/// points, then the largest change between neighbouring derivatives.
/// Needs at least 16 strictly increasing grid points.
SmoothnessReport smoothness_probe(const Predictor& f, dataset::Input axis,
                                  std::span<const double> grid, const dataset::Inputs& base);
SmoothnessReport smoothness_probe(const neural::Network& net, dataset::Input axis,
                                  std::span<const double> grid, const dataset::Inputs& base);

}  // namespace msr::metrics
