#include "msr/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "msr/equilibrium.hpp"
#include "msr/error.hpp"
#include "msr/random.hpp"
#include "msr/spline.hpp"

namespace msr::dataset {
namespace {

constexpr std::array<std::string_view, input_count> kShortNames{"T", "m_cat", "SC", "NC", "f_CH4"};
constexpr std::array<std::string_view, input_count> kColumnNames{"T_K", "m_cat_g", "SC", "NC",
                                                                 "f_CH4_mol_s"};
constexpr std::size_t kColumns = 12;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(std::string_view field, std::size_t line, std::string_view column) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw DataError(fmt::format("line {}: column {}: cannot parse '{}' as a number", line, column, field));
  }
  return v;
}

bool header_matches(std::string_view line) {
  const auto fields = split_fields(line);
  const auto expected = split_fields(csv_header);
  return fields == expected;
}

struct ParsedRow {
  DataRecord record;
  std::size_t line = 0;
};

// Calls `row` for every data line; throws DataError on malformed content.
template <typename F>
void parse_rows(std::istream& in, F&& row) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError("line 1: missing header");
  ++line_no;
  if (!header_matches(line)) {
    throw DataError(fmt::format("line 1: header must be '{}'", csv_header));
  }
  const auto names = split_fields(csv_header);
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != kColumns) {
      throw DataError(fmt::format("line {}: expected {} columns, found {}", line_no, kColumns, f.size()));
    }
    ParsedRow r;
    r.line = line_no;
    for (std::size_t i = 0; i < input_count; ++i) {
      // CSV order: T, m_cat, SC, NC, CC, f_CH4
      const std::size_t col = i < 4 ? i : 5;
      r.record.inputs[i] = parse_number(f[col], line_no, names[col]);
    }
    r.record.co2_ratio = parse_number(f[4], line_no, names[4]);
    for (std::size_t k = 0; k < GasComposition::size; ++k) {
      r.record.target.fractions[k] = parse_number(f[6 + k], line_no, names[6 + k]);
    }
    try {
      r.record.source = source_from_string(f[10]);
      r.record.regime = regime_from_string(f[11]);
    } catch (const DataError& e) {
      throw DataError(fmt::format("line {}: {}", line_no, e.what()));
    }
    row(r);
  }
}


}  // namespace

void set_input(OperatingPoint& op, Input axis, double v) {
  switch (axis) {
    case Input::temperature: op.temperature = v; break;
    case Input::catalyst_mass: op.catalyst_mass = v; break;
    case Input::steam_ratio: op.steam_ratio = v; break;
    case Input::nitrogen_ratio: op.nitrogen_ratio = v; break;
    case Input::methane_flow: op.methane_flow = v; break;
  }
}

double get_input(const OperatingPoint& op, Input axis) {
  switch (axis) {
    case Input::temperature: return op.temperature;
    case Input::catalyst_mass: return op.catalyst_mass;
    case Input::steam_ratio: return op.steam_ratio;
    case Input::nitrogen_ratio: return op.nitrogen_ratio;
    case Input::methane_flow: return op.methane_flow;
  }
  return 0.0;
}

std::string_view input_name(Input i) { return kShortNames[static_cast<std::size_t>(i)]; }

Input input_from_name(std::string_view name) {
  for (std::size_t i = 0; i < input_count; ++i) {
    if (name == kShortNames[i] || name == kColumnNames[i]) return static_cast<Input>(i);
  }
  throw UsageError(fmt::format("unknown input '{}' (expected T, m_cat, SC, NC or f_CH4)", name));
}

std::string_view to_string(Source s) {
  switch (s) {
    case Source::experimental: return "experimental";
    case Source::interpolated: return "interpolated";
    case Source::simulated: return "simulated";
  }
  return "simulated";
}

Source source_from_string(std::string_view s) {
  if (s == "experimental") return Source::experimental;
  if (s == "interpolated") return Source::interpolated;
  if (s == "simulated") return Source::simulated;
  throw DataError(fmt::format("unknown source '{}'", s));
}

OperatingPoint DataRecord::operating_point(double pressure) const {
  OperatingPoint op;
  op.temperature = input(Input::temperature);
  op.catalyst_mass = input(Input::catalyst_mass);
  op.steam_ratio = input(Input::steam_ratio);
  op.nitrogen_ratio = input(Input::nitrogen_ratio);
  op.methane_flow = input(Input::methane_flow);
  op.co2_ratio = co2_ratio;
  op.pressure = pressure;
  return op;
}

DataRecord DataRecord::from(const OperatingPoint& op, const GasComposition& target, Source source,
                            Regime regime) {
  DataRecord r;
  r.inputs = {op.temperature, op.catalyst_mass, op.steam_ratio, op.nitrogen_ratio, op.methane_flow};
  r.co2_ratio = op.co2_ratio;
  r.target = target;
  r.source = source;
  r.regime = regime;
  return r;
}

void write_csv(std::ostream& out, const std::vector<DataRecord>& records) {
  out << csv_header << '\n';
  for (const auto& r : records) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", r.inputs[0], r.inputs[1], r.inputs[2],
                       r.inputs[3], r.co2_ratio, r.inputs[4], r.target.fractions[0],
                       r.target.fractions[1], r.target.fractions[2], r.target.fractions[3],
                       to_string(r.source), to_string(r.regime));
  }
}

void write_csv(const std::filesystem::path& path, const std::vector<DataRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  write_csv(out, records);
  if (!out) throw DataError(fmt::format("write failed for '{}'", path.string()));
}

std::vector<DataRecord> read_csv(std::istream& in) {
  std::vector<DataRecord> out;
  parse_rows(in, [&](const ParsedRow& r) {
    if (!r.record.target.valid(1e-9)) {
      throw DataError(fmt::format("line {}: target fractions must be >= 0 and sum to 1", r.line));
    }
    out.push_back(r.record);
  });
  return out;
}

std::vector<DataRecord> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open dataset '{}'", path.string()));
  return read_csv(in);
}

IngestReport ingest_experimental(std::istream& in, double reject_tolerance) {
  IngestReport rep;
  parse_rows(in, [&](const ParsedRow& r) {
    DataRecord rec = r.record;
    rec.source = Source::experimental;
    const auto& f = rec.target.fractions;
    const bool negative = std::any_of(f.begin(), f.end(), [](double v) { return v < 0.0; });
    const double sum = rec.target.sum();
    if (negative || std::abs(sum - 1.0) > reject_tolerance) {
      rep.rejected.push_back(fmt::format("line {}: non-physical composition (sum {}{})", r.line, sum,
                                         negative ? ", negative fraction" : ""));
      return;
    }
    if (std::abs(sum - 1.0) > 1e-3) {
      rep.warnings.push_back(fmt::format("line {}: fractions sum to {}, renormalized", r.line, sum));
    }
    rec.target = rec.target.renormalized();
    rep.records.push_back(rec);
  });
  return rep;
}

IngestReport ingest_experimental(const std::filesystem::path& path, double reject_tolerance) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open experimental data '{}'", path.string()));
  return ingest_experimental(in, reject_tolerance);
}

ReferencePoint reference_point(const OperatingPoint& op, const kinetics::KineticParams& params,
                               const RegimeThresholds& thresholds,
                               const equilibrium::SolverOptions& solver) {
  ReferencePoint out;
  const auto eq = equilibrium::solve_equilibrium(op, solver);
  const double x_eq = eq.conv.reforming;
  const double x_kin = kinetics::reaction_rate(params, op) / op.methane_flow;
  out.ratio = x_kin / x_eq;
  if (out.ratio <= thresholds.kinetic_max) {
    out.regime = Regime::kinetic;
    const double k_sh = thermo::k_equilibrium(thermo::Reaction::WGSR, op.temperature);
    const Conversions c{x_kin, kinetics::shift_extent(x_kin, op.steam_ratio, op.co2_ratio, k_sh)};
    out.composition = kinetics::dry_composition(
        kinetics::outlet_moles(c, op.steam_ratio, op.nitrogen_ratio, op.co2_ratio));
  } else if (out.ratio >= thresholds.equilibrium_min) {
    out.regime = Regime::equilibrium;
    out.composition = kinetics::dry_composition(
        kinetics::outlet_moles(eq.conv, op.steam_ratio, op.nitrogen_ratio, op.co2_ratio));
  } else {
    out.regime = Regime::transition;
  }
  return out;
}

double Axis::at(std::size_t i) const {
  if (count <= 1) return from;
  if (geometric) {
    if (i + 1 == count) return to;
    return from * std::pow(to / from, static_cast<double>(i) / static_cast<double>(count - 1));
  }
  return from + (to - from) * static_cast<double>(i) / static_cast<double>(count - 1);
}

GridSpec GridSpec::defaults() {
  GridSpec g;
  g.axes[static_cast<std::size_t>(Input::temperature)] = {773.15, 1073.15, 7};
  g.axes[static_cast<std::size_t>(Input::catalyst_mass)] = {0.1, 20.0, 8, true};
  g.axes[static_cast<std::size_t>(Input::steam_ratio)] = {1.0, 4.0, 4};
  g.axes[static_cast<std::size_t>(Input::nitrogen_ratio)] = {0.0, 6.0, 4};
  g.axes[static_cast<std::size_t>(Input::methane_flow)] = {1e-5, 2e-4, 5, true};
  return g;
}

std::size_t GridSpec::size() const {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.count;
  return n;
}

GenerationReport generate_theoretical(const GridSpec& grid, const kinetics::KineticParams& params,
                                      const RegimeThresholds& thresholds, unsigned threads,
                                      const equilibrium::SolverOptions& solver) {
  for (std::size_t d = 0; d < input_count; ++d) {
    const Axis& a = grid.axes[d];
    if (a.geometric && a.count > 1 && !(a.from > 0.0 && a.to > 0.0)) {
      throw UsageError(fmt::format("geometric axis {} needs positive bounds", input_name(static_cast<Input>(d))));
    }
  }
  const std::size_t n = grid.size();
  struct Slot {
    std::optional<DataRecord> record;
    Regime regime = Regime::unknown;
    std::string failure;
  };
  std::vector<Slot> slots(n);

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      std::array<std::size_t, input_count> digit{};
      std::size_t rest = idx;
      for (std::size_t d = input_count; d-- > 0;) {
        digit[d] = rest % grid.axes[d].count;
        rest /= grid.axes[d].count;
      }
      OperatingPoint op;
      op.pressure = grid.pressure;
      op.co2_ratio = grid.co2_ratio;
      for (std::size_t d = 0; d < input_count; ++d) {
        set_input(op, static_cast<Input>(d), grid.axes[d].at(digit[d]));
      }
      Slot& s = slots[idx];
      try {
        op.validate();
        const auto ref = reference_point(op, params, thresholds, solver);
        s.regime = ref.regime;
        if (ref.composition) {
          s.record = DataRecord::from(op, *ref.composition, Source::simulated, ref.regime);
        }
      } catch (const Error& e) {
        s.failure = fmt::format("grid point {}: {}", idx, e.what());
      }
    }
  };

  threads = std::max(1u, threads);
  if (threads == 1 || n < 2 * threads) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = std::min(n, t * chunk), e = std::min(n, b + chunk);
      pool.emplace_back(work, b, e);
    }
  }

  GenerationReport rep;
  for (auto& s : slots) {
    if (!s.failure.empty()) {
      rep.failures.push_back(std::move(s.failure));
      continue;
    }
    switch (s.regime) {
      case Regime::kinetic: ++rep.kinetic; break;
      case Regime::equilibrium: ++rep.equilibrium; break;
      case Regime::transition: ++rep.transition; break;
      case Regime::unknown: break;
    }
    if (s.record) rep.records.push_back(*s.record);
  }
  return rep;
}

std::vector<SeriesSpec> reference_series() {
  std::vector<double> temps;
  for (int i = 0; i < 7; ++i) temps.push_back(773.15 + 50.0 * i);

  std::vector<SeriesSpec> out;
  OperatingPoint kinetic;  // lightly loaded bed, kinetic throughout
  kinetic.steam_ratio = 3.0;
  kinetic.nitrogen_ratio = 3.0;
  kinetic.methane_flow = 3.38e-5;
  kinetic.catalyst_mass = 1.48;
  out.push_back({kinetic, Input::temperature, temps});

  OperatingPoint equil;  // undiluted feed, low steam
  equil.steam_ratio = 2.0;
  equil.nitrogen_ratio = 0.0;
  equil.methane_flow = 1.01e-4;
  equil.catalyst_mass = 5.03;
  out.push_back({equil, Input::temperature, temps});

  OperatingPoint heavy;  // heavy catalyst loading at low flow
  heavy.steam_ratio = 3.0;
  heavy.nitrogen_ratio = 3.0;
  heavy.methane_flow = 1.0e-5;
  heavy.catalyst_mass = 15.0;
  out.push_back({heavy, Input::temperature, temps});
  return out;
}

std::vector<DataRecord> synthesize_experimental(const std::vector<SeriesSpec>& series,
                                                std::uint64_t seed, double noise,
                                                const kinetics::KineticParams& params,
                                                const equilibrium::SolverOptions& solver) {
  Rng rng(seed);
  std::vector<DataRecord> out;
  for (const auto& s : series) {
    for (double v : s.values) {
      OperatingPoint op = s.base;
      set_input(op, s.axis, v);
      const auto model = kinetics::kinetic_composition(params, op, solver);
      const double ratio = model.reforming.unclamped / model.reforming.equilibrium;
      const Regime regime = ratio <= 0.8   ? Regime::kinetic
                            : ratio >= 1.2 ? Regime::equilibrium
                                           : Regime::transition;
      GasComposition g = model.composition;
      for (double& f : g.fractions) f = std::max(0.0, f * (1.0 + noise * rng.normal()));
      out.push_back(DataRecord::from(op, g.renormalized(), Source::experimental, regime));
    }
  }
  return out;
}

std::vector<std::vector<DataRecord>> group_series(const std::vector<DataRecord>& records,
                                                  Input axis) {
  const auto a = static_cast<std::size_t>(axis);
  std::vector<std::vector<DataRecord>> groups;
  std::map<std::array<double, input_count + 1>, std::size_t> index;
  for (const auto& r : records) {
    std::array<double, input_count + 1> key{};
    for (std::size_t i = 0; i < input_count; ++i) key[i] = i == a ? 0.0 : r.inputs[i];
    key[input_count] = r.co2_ratio;
    const auto [it, fresh] = index.emplace(key, groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(r);
  }
  return groups;
}

std::vector<DataRecord> interpolate_series(const std::vector<DataRecord>& series, Input axis,
                                           std::size_t n_points) {
  if (series.size() < 4) {
    throw DataError(fmt::format("interpolation needs at least 4 points (got {})", series.size()));
  }
  const auto a = static_cast<std::size_t>(axis);
  std::vector<DataRecord> sorted = series;
  std::stable_sort(sorted.begin(), sorted.end(), [a](const DataRecord& l, const DataRecord& r) {
    return l.inputs[a] < r.inputs[a];
  });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].inputs[a] == sorted[i - 1].inputs[a]) {
      throw DataError(fmt::format("interpolation: duplicate {} value {}", input_name(axis),
                                  sorted[i].inputs[a]));
    }
    for (std::size_t k = 0; k < input_count; ++k) {
      if (k != a && sorted[i].inputs[k] != sorted[0].inputs[k]) {
        throw DataError(fmt::format("interpolation: records differ in {} as well as {}",
                                    input_name(static_cast<Input>(k)), input_name(axis)));
      }
    }
  }

  std::vector<double> xs;
  for (const auto& r : sorted) xs.push_back(r.inputs[a]);
  std::vector<NaturalCubicSpline> splines;
  for (std::size_t k = 0; k < GasComposition::size; ++k) {
    std::vector<double> ys;
    for (const auto& r : sorted) ys.push_back(r.target.fractions[k]);
    splines.emplace_back(xs, ys);
  }
  const bool same_regime = std::all_of(sorted.begin(), sorted.end(), [&](const DataRecord& r) {
    return r.regime == sorted.front().regime;
  });

  std::vector<DataRecord> out;
  const double lo = xs.front(), hi = xs.back();
  for (std::size_t i = 1; i <= n_points; ++i) {
    const double v = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_points + 1);
    DataRecord r = sorted.front();
    r.inputs[a] = v;
    for (std::size_t k = 0; k < GasComposition::size; ++k) {
      r.target.fractions[k] = std::max(0.0, splines[k](v));
    }
    r.target = r.target.renormalized();
    r.source = Source::interpolated;
    r.regime = same_regime ? sorted.front().regime : Regime::unknown;
    out.push_back(r);
  }
  return out;
}

std::size_t weight(Source s) {
  switch (s) {
    case Source::experimental: return 4;
    case Source::interpolated: return 2;
    case Source::simulated: return 1;
  }
  return 1;
}

std::vector<DataRecord> augment(const std::vector<DataRecord>& records) {
  std::vector<DataRecord> out;
  for (const auto& r : records) out.insert(out.end(), weight(r.source), r);
  return out;
}

Scaler::Scaler(Inputs min, Inputs max) : min_(min), max_(max) {
  for (std::size_t i = 0; i < input_count; ++i) {
    if (!(max_[i] > min_[i])) {
      throw DataError(fmt::format("scaler: degenerate input dimension {} (min {} >= max {})",
                                  input_name(static_cast<Input>(i)), min_[i], max_[i]));
    }
  }
}

Scaler Scaler::fit(const std::vector<DataRecord>& records) {
  if (records.empty()) throw DataError("scaler: no records to fit");
  Inputs lo = records.front().inputs, hi = records.front().inputs;
  for (const auto& r : records) {
    for (std::size_t i = 0; i < input_count; ++i) {
      lo[i] = std::min(lo[i], r.inputs[i]);
      hi[i] = std::max(hi[i], r.inputs[i]);
    }
  }
  return Scaler(lo, hi);
}

Inputs Scaler::apply(const Inputs& raw) const {
  Inputs out;
  for (std::size_t i = 0; i < input_count; ++i) out[i] = (raw[i] - min_[i]) / (max_[i] - min_[i]);
  return out;
}

Inputs Scaler::invert(const Inputs& normalized) const {
  Inputs out;
  for (std::size_t i = 0; i < input_count; ++i) {
    out[i] = min_[i] + normalized[i] * (max_[i] - min_[i]);
  }
  return out;
}

bool Scaler::contains(const Inputs& raw, double tol) const {
  for (std::size_t i = 0; i < input_count; ++i) {
    const double span = max_[i] - min_[i];
    if (raw[i] < min_[i] - tol * span || raw[i] > max_[i] + tol * span) return false;
  }
  return true;
}

void SplitSpec::validate() const {
  if (!(train > 0.0 && validation > 0.0 && test > 0.0) ||
      std::abs(train + validation + test - 1.0) > 1e-9) {
    throw UsageError(fmt::format("split fractions must be positive and sum to 1 (got {}, {}, {})",
                                 train, validation, test));
  }
}

Split split(const std::vector<DataRecord>& records, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = records.size();
  if (n < 10) throw DataError(fmt::format("split needs at least 10 records (got {})", n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i)));
    std::swap(order[i], order[j]);
  }
  const auto cut1 = static_cast<std::size_t>(std::floor(spec.train * static_cast<double>(n) + 1e-9));
  const auto cut2 = static_cast<std::size_t>(
      std::floor((spec.train + spec.validation) * static_cast<double>(n) + 1e-9));
  Split s;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = i < cut1 ? s.train : i < cut2 ? s.validation : s.test;
    dst.push_back(records[order[i]]);
  }
  return s;
}

}  // namespace msr::dataset
