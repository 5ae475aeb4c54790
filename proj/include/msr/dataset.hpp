#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msr/kinetics.hpp"
#include "msr/types.hpp"

namespace msr::dataset {

/// Network inputs, in this order.
enum class Input : std::size_t { temperature = 0, catalyst_mass, steam_ratio, nitrogen_ratio, methane_flow };
inline constexpr std::size_t input_count = 5;

/// Short names accepted on the command line ("T", "m_cat", "SC", "NC", "f_CH4").
std::string_view input_name(Input i);
/// Accepts short names and CSV column names.
Input input_from_name(std::string_view name);

using Inputs = std::array<double, input_count>;

void set_input(OperatingPoint& op, Input axis, double value);
double get_input(const OperatingPoint& op, Input axis);

enum class Source { experimental, interpolated, simulated };

std::string_view to_string(Source s);
Source source_from_string(std::string_view s);

struct DataRecord {
  Inputs inputs{};  // raw units: K, g, -, -, mol/s
  double co2_ratio = 0.0;
  GasComposition target;
  Source source = Source::simulated;
  Regime regime = Regime::unknown;

  double input(Input i) const { return inputs[static_cast<std::size_t>(i)]; }
  OperatingPoint operating_point(double pressure = 101325.0) const;
  static DataRecord from(const OperatingPoint& op, const GasComposition& target, Source source,
                         Regime regime);

  friend bool operator==(const DataRecord&, const DataRecord&) = default;
};

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view csv_header =
    "T_K,m_cat_g,SC,NC,CC,f_CH4_mol_s,y_H2,y_CH4,y_CO,y_CO2,source,regime";

/// Writes header plus one line per record; numbers in shortest round-trip form.
void write_csv(std::ostream& out, const std::vector<DataRecord>& records);
void write_csv(const std::filesystem::path& path, const std::vector<DataRecord>& records);

/// Strict reader for files produced by write_csv (throws DataError with line number).
std::vector<DataRecord> read_csv(std::istream& in);
std::vector<DataRecord> read_csv(const std::filesystem::path& path);

struct IngestReport {
  std::vector<DataRecord> records;
  std::vector<std::string> warnings;  // renormalized rows
  std::vector<std::string> rejected;  // non-physical rows, with reasons
};

/// Reads experimental measurements. Rows whose fractions are negative or sum
/// further than `reject_tolerance` from one are rejected; rows off by more
/// than 1e-3 are renormalized with a warning. All records are tagged
/// experimental.
IngestReport ingest_experimental(std::istream& in, double reject_tolerance = 0.05);
IngestReport ingest_experimental(const std::filesystem::path& path,
                                 double reject_tolerance = 0.05);

// ---------------------------------------------------------------------------
// Reference models and the regime rule
// ---------------------------------------------------------------------------

struct RegimeThresholds {
  double kinetic_max = 0.8;
  double equilibrium_min = 1.2;
};

struct ReferencePoint {
  double ratio = 0.0;  // unclamped kinetic conversion / equilibrium conversion
  Regime regime = Regime::unknown;
  std::optional<GasComposition> composition;  // empty in the transition band
};

/// Kinetic model below the band, equilibrium model above, nothing inside.
ReferencePoint reference_point(const OperatingPoint& op,
                               const kinetics::KineticParams& params = {},
                               const RegimeThresholds& thresholds = {},
                               const equilibrium::SolverOptions& solver = {});

// ---------------------------------------------------------------------------
// Theoretical data
// ---------------------------------------------------------------------------

struct Axis {
  double from = 0.0;
  double to = 0.0;
  std::size_t count = 0;
  bool geometric = false;  // equal ratios between levels; needs from, to > 0

  double at(std::size_t i) const;
};

struct GridSpec {
  std::array<Axis, input_count> axes;  // indexed by Input
  double pressure = 101325.0;
  double co2_ratio = 0.0;

  /// T 773.15-1073.15 K, m_cat 0.1-20 g, SC 1-4, NC 0-6, f_CH4 1e-5-2e-4 mol/s.
  static GridSpec defaults();
  std::size_t size() const;
  bool empty() const { return size() == 0; }
};

struct GenerationReport {
  std::vector<DataRecord> records;
  std::size_t kinetic = 0;
  std::size_t equilibrium = 0;
  std::size_t transition = 0;  // points skipped inside the band
  std::vector<std::string> failures;  // solver failures, point skipped
};

/// Sweeps the grid in row-major order (T outermost, f_CH4 innermost).
/// Output order is by grid index for any thread count.
GenerationReport generate_theoretical(const GridSpec& grid,
                                      const kinetics::KineticParams& params = {},
                                      const RegimeThresholds& thresholds = {},
                                      unsigned threads = 1,
                                      const equilibrium::SolverOptions& solver = {});

/// A measured series: fixed conditions, one varied input.
struct SeriesSpec {
  OperatingPoint base;
  Input axis = Input::temperature;
  std::vector<double> values;
};

/// Three temperature series at fixed feed and loading, evaluated with the
/// clamped kinetic model.
std::vector<SeriesSpec> reference_series();

/// Synthetic stand-in for experimental data: model composition with seeded
/// multiplicative noise of relative size `noise`, renormalized.
std::vector<DataRecord> synthesize_experimental(const std::vector<SeriesSpec>& series,
                                                std::uint64_t seed, double noise = 0.01,
                                                const kinetics::KineticParams& params = {},
                                                const equilibrium::SolverOptions& solver = {});

// ---------------------------------------------------------------------------
// Interpolation, augmentation, scaling, splitting
// ---------------------------------------------------------------------------

/// Groups records into series that share every input but `axis` (and CC),
/// keeping first-appearance order.
std::vector<std::vector<DataRecord>> group_series(const std::vector<DataRecord>& records,
                                                  Input axis);

/// Natural cubic spline per component along `axis`; `n_points` equally spaced
/// samples strictly inside the axis hull.
std::vector<DataRecord> interpolate_series(const std::vector<DataRecord>& series, Input axis,
                                           std::size_t n_points);

/// Weights: experimental 4, interpolated 2, simulated 1.
std::size_t weight(Source s);

/// Repeats each record `weight(source)` times, duplicates adjacent.
std::vector<DataRecord> augment(const std::vector<DataRecord>& records);

class Scaler {
 public:
  Scaler() = default;
  Scaler(Inputs min, Inputs max);

  static Scaler fit(const std::vector<DataRecord>& records);

  Inputs apply(const Inputs& raw) const;
  Inputs invert(const Inputs& normalized) const;

  /// True when every raw input lies inside the fitted hull.
  bool contains(const Inputs& raw, double tol = 1e-12) const;

  const Inputs& min() const { return min_; }
  const Inputs& max() const { return max_; }

  friend bool operator==(const Scaler&, const Scaler&) = default;

 private:
  Inputs min_{};
  Inputs max_{};
};

struct SplitSpec {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
  std::uint64_t seed = 42;

  void validate() const;
};

struct Split {
  std::vector<DataRecord> train, validation, test;
};

/// Seeded shuffle, then cuts at floor(train*n) and floor((train+validation)*n).
Split split(const std::vector<DataRecord>& records, const SplitSpec& spec);

}  // namespace msr::dataset
