#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "msr/dataset.hpp"
#include "msr/error.hpp"
#include "msr/hpo.hpp"
#include "msr/metrics.hpp"
#include "msr/neural.hpp"
#include "msr/pipeline.hpp"

namespace fs = std::filesystem;
using namespace msr;

namespace {

struct Global {
  std::uint64_t seed = 42;
  unsigned threads = 1;
  std::string shift_residual = "mass-action";
  bool quiet = false;

  equilibrium::SolverOptions solver() const {
    equilibrium::SolverOptions s;
    s.shift_form = equilibrium::shift_residual_from_string(shift_residual);
    return s;
  }
};

void note(const Global& g, const std::string& s) {
  if (!g.quiet) std::cerr << s;
}

void require_file(const std::string& path, std::string_view what) {
  if (!fs::is_regular_file(path)) throw DataError(fmt::format("{} '{}' does not exist", what, path));
}

void require_writable(const std::string& path) {
  const fs::path parent = fs::absolute(path).parent_path();
  if (!fs::is_directory(parent)) {
    throw DataError(fmt::format("cannot write '{}': directory {} does not exist", path, parent.string()));
  }
}

double parse_number(std::string_view s, std::string_view what) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw UsageError(fmt::format("bad number '{}' for {}", s, what));
  return v;
}

/// Applies "name=value" settings on top of the reference operating point.
OperatingPoint fixed_point(const std::vector<std::string>& items) {
  OperatingPoint op;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError(fmt::format("--fixed expects name=value, got '{}'", item));
    const std::string name = item.substr(0, eq);
    const double v = parse_number(std::string_view(item).substr(eq + 1), name);
    if (name == "CC") op.co2_ratio = v;
    else if (name == "P") op.pressure = v;
    else dataset::set_input(op, dataset::input_from_name(name), v);
  }
  op.validate();
  return op;
}

dataset::Inputs inputs_of(const OperatingPoint& op) {
  return {op.temperature, op.catalyst_mass, op.steam_ratio, op.nitrogen_ratio, op.methane_flow};
}

/// Reads rows of raw inputs from any CSV whose header names the five input columns.
std::vector<dataset::Inputs> read_inputs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  if (!std::getline(in, line)) throw DataError(fmt::format("'{}' is empty", path.string()));
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  std::array<std::size_t, dataset::input_count> col{};
  for (std::size_t i = 0; i < dataset::input_count; ++i) {
    bool found = false;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (found) break;
      try {
        if (dataset::input_from_name(header[c]) == static_cast<dataset::Input>(i)) {
          col[i] = c;
          found = true;
        }
      } catch (const UsageError&) {
        // not an input column
      }
    }
    if (!found) {
      throw DataError(fmt::format("'{}' has no column for {}", path.string(),
                                  dataset::input_name(static_cast<dataset::Input>(i))));
    }
  }
  std::vector<dataset::Inputs> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    dataset::Inputs x{};
    for (std::size_t i = 0; i < dataset::input_count; ++i) {
      if (col[i] >= cells.size()) throw DataError(fmt::format("line {}: too few fields", line_no));
      try {
        x[i] = parse_number(cells[col[i]], header[col[i]]);
      } catch (const UsageError& e) {
        throw DataError(fmt::format("line {}: {}", line_no, e.what()));
      }
    }
    rows.push_back(x);
  }
  return rows;
}

// ---------------------------------------------------------------------------

struct GenData {
  std::string out, grid, experimental, bundle_out;
  bool no_experimental = false;
  std::size_t interp_points = 0;
};

int cmd_gen_data(const Global& g, const GenData& o) {
  if (!o.bundle_out.empty()) {
    require_writable(o.bundle_out);
    const auto bundle = pipeline::synthetic_bundle(g.seed, g.solver());
    dataset::write_csv(fs::path(o.bundle_out), bundle);
    note(g, fmt::format("wrote {} synthetic experimental records to {}\n", bundle.size(), o.bundle_out));
    if (o.out.empty()) return 0;
  }
  if (o.out.empty()) throw UsageError("gen-data needs --out");
  require_writable(o.out);
  if (!o.experimental.empty()) require_file(o.experimental, "experimental data");

  pipeline::CorpusOptions c;
  c.grid = pipeline::parse_grid(o.grid);
  c.include_experimental = !o.no_experimental;
  if (!o.experimental.empty()) c.experimental = o.experimental;
  if (o.interp_points > 0) c.interpolation_points = o.interp_points;
  c.seed = g.seed;
  c.threads = g.threads;
  c.solver = g.solver();
  const auto corpus = pipeline::build_corpus(c);
  dataset::write_csv(fs::path(o.out), corpus.records);
  note(g, pipeline::summarize(corpus));
  return 0;
}

struct Train {
  std::string data, model, history, metrics;
  std::vector<int> hidden{6, 8, 6};
  double lr = 0.001;
  int epochs = 20000;
  int patience = 0;
  bool split_before_augment = false;
};

int cmd_train(const Global& g, const Train& o) {
  require_file(o.data, "dataset");
  require_writable(o.model);
  const std::string history = o.history.empty() ? o.model + ".history.csv" : o.history;
  require_writable(history);
  if (!o.metrics.empty()) require_writable(o.metrics);

  neural::NetworkConfig cfg;
  cfg.hidden_sizes = o.hidden;
  cfg.learning_rate = o.lr;
  cfg.max_epochs = o.epochs;
  if (o.patience > 0) cfg.patience = o.patience;
  cfg.validate();
  for (const auto& w : cfg.warnings()) std::cerr << "warning: " << w << '\n';

  const auto records = dataset::read_csv(fs::path(o.data));
  const auto prepared = pipeline::prepare(records, {.seed = g.seed, .split_before_augment = o.split_before_augment});
  note(g, fmt::format("train {} / validation {} / test {} records; {} network, {} epochs\n", prepared.train.size(),
                      prepared.validation.size(), prepared.test.size(), fmt::join(cfg.hidden_sizes, "-"), cfg.max_epochs));
  const auto out = pipeline::train(prepared, cfg, g.seed);
  neural::save(out.net, o.model);
  neural::write_history(history, out.report);
  if (!o.metrics.empty()) metrics::write_report_csv(fs::path(o.metrics), out.test);
  note(g, fmt::format("stopped: {} after {} epochs ({:.1f} s); train MSE {:.4e}\n", neural::to_string(out.report.stop),
                      out.report.epochs, out.report.wall_seconds,
                      out.report.train_loss.empty() ? out.report.initial_train_loss : out.report.train_loss.back()));
  std::cout << "test set\n" << metrics::format_report(out.test);
  return 0;
}

struct Search {
  std::string data, out, model, strategy = "random";
  int trials = 20, max_evals = 500, epoch_cap = 0;
  bool benchmark = false, split_before_augment = false;
};

int cmd_search(const Global& g, const Search& o) {
  if (o.strategy != "random" && o.strategy != "bayes") {
    throw UsageError(fmt::format("--strategy must be random or bayes, got '{}'", o.strategy));
  }
  if (o.out.empty()) throw UsageError("search needs --out for the trial log");
  require_writable(o.out);
  if (!o.model.empty()) require_writable(o.model);
  if (!o.benchmark) require_file(o.data, "dataset");

  hpo::SearchOptions opts;
  opts.seed = pipeline::stage_seed(g.seed, "search");
  opts.threads = g.threads;
  if (o.epoch_cap > 0) opts.epoch_cap = o.epoch_cap;
  hpo::TrialLog log(o.out);
  opts.on_trial = [&](const hpo::Trial& t) {
    log.append(t);
    note(g, fmt::format("trial {}: {} lr {:.3e} epochs {} -> {}\n", t.id, fmt::join(t.config.hidden_sizes, "-"),
                        t.config.learning_rate, t.config.max_epochs,
                        t.status == hpo::TrialStatus::ok ? fmt::format("{:.4e}", t.outcome.validation_mse) : t.note));
  };
  opts.on_note = [&](const std::string& s) { std::cerr << "note: " << s << '\n'; };

  std::optional<pipeline::Prepared> prepared;
  hpo::Evaluator eval;
  if (o.benchmark) {
    eval = hpo::benchmark_evaluator();
  } else {
    prepared = pipeline::prepare(dataset::read_csv(fs::path(o.data)),
                                 {.seed = g.seed, .split_before_augment = o.split_before_augment});
    eval = hpo::training_evaluator(prepared->train, prepared->validation, prepared->test, prepared->scaler);
  }
  const auto result = o.strategy == "random" ? hpo::random_search(eval, o.trials, opts)
                                             : hpo::bayes_search(eval, o.max_evals, opts);
  const auto ranked = hpo::leaderboard(result.trials);
  std::cout << hpo::format_leaderboard(ranked);
  if (!result.best) throw NumericalError("every trial failed");
  if (!o.model.empty() && !o.benchmark) {
    // retrain the winner so the saved model matches its logged trial exactly
    neural::Network net = neural::Network::init(result.best->config);
    net.scaler = prepared->scaler;
    neural::train_bfgs(net, prepared->train, &prepared->validation, result.best->config);
    neural::save(net, o.model);
    note(g, fmt::format("best model (trial {}) saved to {}\n", result.best->id, o.model));
  }
  return 0;
}

struct Predict {
  std::string model, data, out;
  std::vector<std::string> fixed;
};

int cmd_predict(const Global& g, const Predict& o) {
  require_file(o.model, "model");
  if (!o.data.empty()) require_file(o.data, "input file");
  if (!o.out.empty()) require_writable(o.out);
  const auto net = neural::load(o.model);
  const std::vector<dataset::Inputs> rows =
      o.data.empty() ? std::vector<dataset::Inputs>{inputs_of(fixed_point(o.fixed))} : read_inputs(o.data);

  std::ofstream file;
  if (!o.out.empty()) file.open(o.out);
  std::ostream& out = o.out.empty() ? std::cout : file;
  out << "T_K,m_cat_g,SC,NC,f_CH4_mol_s,y_H2,y_CH4,y_CO,y_CO2\n";
  std::size_t outside = 0;
  for (const auto& x : rows) {
    if (!net.scaler.contains(x, 1e-9)) ++outside;
    const auto y = net.predict(x);
    out << fmt::format("{},{}\n", fmt::join(x, ","), fmt::join(y.fractions, ","));
  }
  if (outside > 0) std::cerr << fmt::format("warning: {} of {} inputs lie outside the training hull\n", outside, rows.size());
  (void)g;
  return 0;
}

struct Eval {
  std::string model, data, out, fold = "all";
  bool split_before_augment = false;
};

int cmd_eval(const Global& g, const Eval& o) {
  require_file(o.model, "model");
  require_file(o.data, "dataset");
  if (!o.out.empty()) require_writable(o.out);
  const auto net = neural::load(o.model);
  const auto records = dataset::read_csv(fs::path(o.data));
  if (records.empty()) throw DataError(fmt::format("'{}' holds no records", o.data));

  metrics::EvalReport rep;
  if (o.fold == "all") {
    rep = metrics::evaluate(net, records);
  } else {
    const auto p = pipeline::prepare(records, {.seed = g.seed, .split_before_augment = o.split_before_augment});
    const neural::Batch* b = o.fold == "train" ? &p.train
                             : o.fold == "validation" ? &p.validation
                             : o.fold == "test" ? &p.test
                                                : nullptr;
    if (!b) throw UsageError(fmt::format("--fold must be all, train, validation or test, got '{}'", o.fold));
    if (!(p.scaler == net.scaler)) std::cerr << "warning: dataset scaling differs from the model's\n";
    const neural::Batch fold = neural::Batch::from(
        o.fold == "train" ? p.split.train : o.fold == "validation" ? p.split.validation : p.split.test, net.scaler);
    rep = metrics::evaluate(net.forward(fold.inputs), fold.targets);
  }
  std::cout << metrics::format_report(rep);
  if (!o.out.empty()) metrics::write_report_csv(fs::path(o.out), rep);
  return 0;
}

struct Sweep {
  std::string model, vary, out, reference = "regime-rule";
  double from = 0, to = 0;
  std::size_t points = 31;
  std::vector<std::string> fixed;
};

int cmd_sweep(const Global& g, const Sweep& o) {
  const auto axis = dataset::input_from_name(o.vary);
  if (o.points < 1) throw UsageError("--points must be at least 1");
  if (!o.model.empty()) require_file(o.model, "model");
  if (!o.out.empty()) require_writable(o.out);
  std::optional<neural::Network> net;
  if (!o.model.empty()) net = neural::load(o.model);

  metrics::SweepOptions opts;
  opts.solver = g.solver();
  if (o.reference == "none") opts.with_reference = false;
  else opts.mode = metrics::reference_mode_from_string(o.reference);
  const auto grid = metrics::linspace(o.from, o.to, o.points);
  const auto table = metrics::sweep(net ? &*net : nullptr, axis, grid, fixed_point(o.fixed), opts);
  for (const auto& w : table.warnings) std::cerr << "warning: " << w << '\n';
  if (o.out.empty()) {
    metrics::write_sweep_csv(std::cout, table);
  } else {
    metrics::write_sweep_csv(fs::path(o.out), table);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Methane steam reforming surrogate: data generation, training, search and analysis"};
  app.set_config("--config", "", "INI or TOML file with option values; command-line flags win");
  app.require_subcommand(1);
  app.fallthrough();

  Global g;
  app.add_option("--seed", g.seed, "Root seed for every stochastic stage")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for grid generation and random search")
      ->check(CLI::Range(1u, 256u))
      ->capture_default_str();
  app.add_option("--shift-residual", g.shift_residual, "Shift equation form in the equilibrium solver")
      ->check(CLI::IsMember({"mass-action", "paper"}))
      ->capture_default_str();
  app.add_flag("-q,--quiet", g.quiet, "Suppress progress output");

  GenData gd;
  auto* gen = app.add_subcommand("gen-data", "Build the training corpus CSV");
  gen->add_option("--out", gd.out, "Dataset CSV to write");
  gen->add_option("--grid", gd.grid, "Grid, e.g. T=773.15:1073.15:7,m_cat=0.1:20:8:log (or 'none')");
  gen->add_option("--experimental", gd.experimental, "Measured series CSV (default: synthetic bundle)");
  gen->add_flag("--no-experimental", gd.no_experimental, "Theoretical grid only");
  gen->add_option("--interp-points", gd.interp_points, "Interpolated samples per series (default 2x length)");
  gen->add_option("--bundle-out", gd.bundle_out, "Also write the synthetic experimental bundle here");

  Train tr;
  auto* train = app.add_subcommand("train", "Train a network on a dataset");
  train->add_option("--data", tr.data, "Dataset CSV")->required();
  train->add_option("--model", tr.model, "Model file to write")->required();
  train->add_option("--history", tr.history, "Per-epoch loss CSV (default <model>.history.csv)");
  train->add_option("--metrics", tr.metrics, "Test-set metrics CSV");
  train->add_option("--hidden", tr.hidden, "Hidden layer sizes")->delimiter(',')->capture_default_str();
  train->add_option("--lr", tr.lr, "Initial line-search step")->capture_default_str();
  train->add_option("--epochs", tr.epochs, "Maximum BFGS updates")->capture_default_str();
  train->add_option("--patience", tr.patience, "Stop after this many rising validation losses (0 = off)");
  train->add_flag("--split-before-augment", tr.split_before_augment, "Split distinct records, then augment each fold");

  Search se;
  auto* search = app.add_subcommand("search", "Architecture and hyperparameter search");
  search->add_option("--data", se.data, "Dataset CSV");
  search->add_option("--out", se.out, "Trial log CSV (appended)");
  search->add_option("--model", se.model, "Where to save the best model");
  search->add_option("--strategy", se.strategy, "random or bayes")->capture_default_str();
  search->add_option("--trials", se.trials, "Random-search trials")->capture_default_str();
  search->add_option("--max-evals", se.max_evals, "Bayesian-optimization evaluations, warmup included")
      ->capture_default_str();
  search->add_option("--epoch-cap", se.epoch_cap, "Upper bound on epochs per trial (0 = none)");
  search->add_flag("--benchmark", se.benchmark, "Score the analytic benchmark objective instead of training");
  search->add_flag("--split-before-augment", se.split_before_augment, "Split distinct records, then augment each fold");

  Predict pr;
  auto* predict = app.add_subcommand("predict", "Predict compositions");
  predict->add_option("--model", pr.model, "Model file")->required();
  predict->add_option("--data", pr.data, "CSV with T_K,m_cat_g,SC,NC,f_CH4_mol_s columns");
  predict->add_option("--fixed", pr.fixed, "Single point as name=value pairs (T, m_cat, SC, NC, f_CH4, CC, P)");
  predict->add_option("--out", pr.out, "Output CSV (default stdout)");

  Eval ev;
  auto* eval = app.add_subcommand("eval", "Evaluate a model on a dataset");
  eval->add_option("--model", ev.model, "Model file")->required();
  eval->add_option("--data", ev.data, "Dataset CSV")->required();
  eval->add_option("--fold", ev.fold, "all, or train/validation/test of the seeded split")->capture_default_str();
  eval->add_option("--out", ev.out, "Metrics CSV");
  eval->add_flag("--split-before-augment", ev.split_before_augment, "Replay the leakage-free split");

  Sweep sw;
  auto* sweep = app.add_subcommand("sweep", "Vary one input and tabulate predictions and reference models");
  sweep->add_option("--model", sw.model, "Model file (reference columns only when omitted)");
  sweep->add_option("--vary", sw.vary, "Input to vary: T, m_cat, SC, NC or f_CH4")->required();
  sweep->add_option("--from", sw.from, "First value")->required();
  sweep->add_option("--to", sw.to, "Last value")->required();
  sweep->add_option("--points", sw.points, "Grid points")->capture_default_str();
  sweep->add_option("--fixed", sw.fixed, "Other inputs as name=value pairs");
  sweep->add_option("--reference", sw.reference, "regime-rule, kinetic, equilibrium or none")->capture_default_str();
  sweep->add_option("--out", sw.out, "Sweep CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::usage);
  }

  try {
    if (*gen) return cmd_gen_data(g, gd);
    if (*train) return cmd_train(g, tr);
    if (*search) return cmd_search(g, se);
    if (*predict) return cmd_predict(g, pr);
    if (*eval) return cmd_eval(g, ev);
    if (*sweep) return cmd_sweep(g, sw);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data);
  }
  return static_cast<int>(ExitCode::usage);
}
