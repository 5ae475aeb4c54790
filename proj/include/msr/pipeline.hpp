#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msr/dataset.hpp"
#include "msr/equilibrium.hpp"
#include "msr/metrics.hpp"
#include "msr/neural.hpp"

namespace msr::pipeline {

/// Seed of a named stage ("data", "init", "split", "search") under a root seed.
std::uint64_t stage_seed(std::uint64_t root, std::string_view stage);

/// Parses "T=773.15:1073.15:7,m_cat=0.1:20:8:log,..." into a grid. Axes
/// not mentioned keep their defaults; "none" gives an empty grid.
dataset::GridSpec parse_grid(std::string_view text);

struct CorpusOptions {
  dataset::GridSpec grid = dataset::GridSpec::defaults();
  /// Measured series to ingest; the synthetic bundle is used when unset.
  std::optional<std::filesystem::path> experimental;
  bool include_experimental = true;
  dataset::Input interpolation_axis = dataset::Input::temperature;
  /// Interpolated samples per series; twice the series length when unset.
  std::optional<std::size_t> interpolation_points;
  std::uint64_t seed = 42;
  unsigned threads = 1;
  equilibrium::SolverOptions solver;
};

struct Corpus {
  std::vector<dataset::DataRecord> records;  // simulated, then experimental, then interpolated
  std::size_t simulated = 0, experimental = 0, interpolated = 0;
  std::size_t kinetic = 0, equilibrium = 0, transition_skipped = 0;
  std::vector<std::string> warnings;
};

/// The synthetic stand-in for measured data under `root_seed`.
std::vector<dataset::DataRecord> synthetic_bundle(std::uint64_t root_seed,
                                                  const equilibrium::SolverOptions& solver = {});

Corpus build_corpus(const CorpusOptions& options);

std::string summarize(const Corpus& corpus);

struct PrepareOptions {
  dataset::SplitSpec split;  // seed is overwritten from the root seed
  std::uint64_t seed = 42;
  bool split_before_augment = false;
};

struct Prepared {
  dataset::Split split;
  dataset::Scaler scaler;
  neural::Batch train, validation, test;
};

/// Augments, fits the scaler on the augmented corpus and splits. With
/// `split_before_augment` the distinct records are split first and each fold
/// is augmented on its own.
Prepared prepare(const std::vector<dataset::DataRecord>& records, const PrepareOptions& options);

struct TrainOutcome {
  neural::Network net;
  neural::TrainReport report;
  metrics::EvalReport test;
};

/// Trains from the `init` stage seed of `root_seed` and scores the test fold.
TrainOutcome train(const Prepared& data, neural::NetworkConfig config, std::uint64_t root_seed);

}  // namespace msr::pipeline
