#include "msr/pipeline.hpp"

#include <charconv>

#include <fmt/format.h>

#include "msr/error.hpp"
#include "msr/random.hpp"

namespace msr::pipeline {

namespace {

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double number(std::string_view s, std::string_view context) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw UsageError(fmt::format("bad number '{}' in {}", s, context));
  }
  return v;
}

}  // namespace

std::uint64_t stage_seed(std::uint64_t root, std::string_view stage) { return substream_seed(root, stage); }

dataset::GridSpec parse_grid(std::string_view text) {
  dataset::GridSpec g = dataset::GridSpec::defaults();
  if (text.empty()) return g;
  if (text == "none") {
    g.axes[0].count = 0;
    return g;
  }
  for (auto item : split_on(text, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw UsageError(fmt::format("grid item '{}' needs name=spec", item));
    const auto axis = dataset::input_from_name(item.substr(0, eq));
    const auto parts = split_on(item.substr(eq + 1), ':');
    dataset::Axis a;
    if (parts.size() == 1) {
      a.from = a.to = number(parts[0], item);
      a.count = 1;
    } else if (parts.size() == 3 || parts.size() == 4) {
      a.from = number(parts[0], item);
      a.to = number(parts[1], item);
      const double n = number(parts[2], item);
      if (n < 0 || n != static_cast<double>(static_cast<std::size_t>(n))) {
        throw UsageError(fmt::format("grid count in '{}' must be a whole number", item));
      }
      a.count = static_cast<std::size_t>(n);
      if (parts.size() == 4) {
        if (parts[3] == "log") a.geometric = true;
        else if (parts[3] != "lin") throw UsageError(fmt::format("spacing in '{}' must be lin or log", item));
      }
    } else {
      throw UsageError(fmt::format("grid item '{}' must be value or from:to:count[:lin|log]", item));
    }
    g.axes[static_cast<std::size_t>(axis)] = a;
  }
  return g;
}

std::vector<dataset::DataRecord> synthetic_bundle(std::uint64_t root_seed,
                                                  const equilibrium::SolverOptions& solver) {
  return dataset::synthesize_experimental(dataset::reference_series(), stage_seed(root_seed, "data"),
                                          0.01, {}, solver);
}

Corpus build_corpus(const CorpusOptions& o) {
  Corpus c;
  const auto gen = dataset::generate_theoretical(o.grid, {}, {}, o.threads, o.solver);
  c.records = gen.records;
  c.simulated = gen.records.size();
  c.kinetic = gen.kinetic;
  c.equilibrium = gen.equilibrium;
  c.transition_skipped = gen.transition;
  for (const auto& f : gen.failures) c.warnings.push_back("skipped grid point: " + f);
  if (!o.include_experimental) return c;

  std::vector<dataset::DataRecord> measured;
  if (o.experimental) {
    auto ingest = dataset::ingest_experimental(*o.experimental);
    measured = std::move(ingest.records);
    for (auto& w : ingest.warnings) c.warnings.push_back(std::move(w));
    for (auto& r : ingest.rejected) c.warnings.push_back("rejected: " + r);
  } else {
    measured = synthetic_bundle(o.seed, o.solver);
  }
  c.experimental = measured.size();
  c.records.insert(c.records.end(), measured.begin(), measured.end());

  for (const auto& series : dataset::group_series(measured, o.interpolation_axis)) {
    if (series.size() < 4) {
      c.warnings.push_back(fmt::format("series of {} points too short to interpolate", series.size()));
      continue;
    }
    const std::size_t n = o.interpolation_points.value_or(2 * series.size());
    const auto interp = dataset::interpolate_series(series, o.interpolation_axis, n);
    c.interpolated += interp.size();
    c.records.insert(c.records.end(), interp.begin(), interp.end());
  }
  return c;
}

std::string summarize(const Corpus& c) {
  std::string out = fmt::format(
      "records: {}\n  simulated: {} (kinetic {}, equilibrium {}; {} grid points in the transition band skipped)\n"
      "  experimental: {}\n  interpolated: {}\n",
      c.records.size(), c.simulated, c.kinetic, c.equilibrium, c.transition_skipped, c.experimental,
      c.interpolated);
  for (const auto& w : c.warnings) out += fmt::format("warning: {}\n", w);
  return out;
}

Prepared prepare(const std::vector<dataset::DataRecord>& records, const PrepareOptions& o) {
  dataset::SplitSpec spec = o.split;
  spec.seed = stage_seed(o.seed, "split");
  Prepared p;
  if (o.split_before_augment) {
    const auto raw = dataset::split(records, spec);
    p.split = {dataset::augment(raw.train), dataset::augment(raw.validation), dataset::augment(raw.test)};
    p.scaler = dataset::Scaler::fit(dataset::augment(records));
  } else {
    const auto augmented = dataset::augment(records);
    p.scaler = dataset::Scaler::fit(augmented);
    p.split = dataset::split(augmented, spec);
  }
  p.train = neural::Batch::from(p.split.train, p.scaler);
  p.validation = neural::Batch::from(p.split.validation, p.scaler);
  p.test = neural::Batch::from(p.split.test, p.scaler);
  return p;
}

TrainOutcome train(const Prepared& data, neural::NetworkConfig config, std::uint64_t root_seed) {
  config.seed = stage_seed(root_seed, "init");
  config.validate();
  TrainOutcome out;
  out.net = neural::Network::init(config);
  out.net.scaler = data.scaler;
  out.report = neural::train_bfgs(out.net, data.train,
                                  data.validation.size() > 0 ? &data.validation : nullptr, config);
  out.test = metrics::evaluate(out.net.forward(data.test.inputs), data.test.targets);
  return out;
}

}  // namespace msr::pipeline
