#include "msr/hpo.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <thread>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "msr/error.hpp"
#include "msr/metrics.hpp"

namespace msr::hpo {

namespace {

double unit(double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.0; }

int round_in(double u, int lo, int hi) {
  const double v = lo + std::clamp(u, 0.0, 1.0) * (hi - lo);
  return std::clamp(static_cast<int>(std::lround(v)), lo, hi);
}

bool same_candidate(const neural::NetworkConfig& a, const neural::NetworkConfig& b) {
  return a.hidden_sizes == b.hidden_sizes && a.learning_rate == b.learning_rate &&
         a.max_epochs == b.max_epochs;
}

std::uint64_t trial_seed(std::uint64_t root, int id) {
  return substream_seed(root, fmt::format("trial-{}", id));
}

Trial run_trial(const Evaluator& evaluate, int id, neural::NetworkConfig config,
                const SearchOptions& options) {
  if (options.epoch_cap) config.max_epochs = std::min(config.max_epochs, *options.epoch_cap);
  config.seed = trial_seed(options.seed, id);
  Trial t;
  t.id = id;
  t.config = config;
  t.parameter_count = neural::Network::zeros(config.hidden_sizes).parameter_count();
  const auto start = std::chrono::steady_clock::now();
  try {
    t.outcome = evaluate(config);
    if (!std::isfinite(t.outcome.validation_mse) || t.outcome.validation_mse < 0.0) {
      throw NumericalError(fmt::format("objective {} is not a finite non-negative value",
                                       t.outcome.validation_mse));
    }
  } catch (const NumericalError& e) {
    t.status = TrialStatus::failed;
    t.note = e.what();
    t.outcome = {};
    t.outcome.validation_mse = std::numeric_limits<double>::quiet_NaN();
  }
  t.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return t;
}

SearchResult finish(std::vector<Trial> trials) {
  SearchResult r;
  r.trials = std::move(trials);
  for (const auto& t : r.trials) {
    if (t.status != TrialStatus::ok) continue;
    if (!r.best || better(t, *r.best)) r.best = t;
  }
  return r;
}

double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

}  // namespace

void SearchSpace::validate() const {
  if (min_layers < 1 || max_layers > 4 || min_layers > max_layers) {
    throw UsageError("layer range must lie within 1..4");
  }
  if (min_neurons < 1 || min_neurons > max_neurons) throw UsageError("bad neuron range");
  if (!(min_learning_rate > 0.0) || !(min_learning_rate <= max_learning_rate)) {
    throw UsageError("bad learning-rate range");
  }
  if (min_epochs < 1 || min_epochs > max_epochs) throw UsageError("bad epoch range");
}

neural::NetworkConfig SearchSpace::sample(Rng& rng) const {
  neural::NetworkConfig c;
  const int n = static_cast<int>(rng.integer(min_layers, max_layers));
  c.hidden_sizes.clear();
  for (int i = 0; i < n; ++i) c.hidden_sizes.push_back(static_cast<int>(rng.integer(min_neurons, max_neurons)));
  c.learning_rate = std::pow(10.0, rng.uniform(std::log10(min_learning_rate), std::log10(max_learning_rate)));
  c.learning_rate = std::clamp(c.learning_rate, min_learning_rate, max_learning_rate);
  c.max_epochs = static_cast<int>(rng.integer(min_epochs, max_epochs));
  return c;
}

SearchSpace::Encoding SearchSpace::encode(const neural::NetworkConfig& c) const {
  Encoding u = Encoding::Zero();
  u[0] = unit(static_cast<double>(c.hidden_sizes.size()), min_layers, max_layers);
  for (std::size_t i = 0; i < c.hidden_sizes.size() && i < 4; ++i) {
    u[static_cast<Eigen::Index>(i + 1)] = unit(c.hidden_sizes[i], min_neurons, max_neurons);
  }
  u[5] = unit(std::log10(c.learning_rate), std::log10(min_learning_rate), std::log10(max_learning_rate));
  u[6] = unit(std::log(c.max_epochs), std::log(min_epochs), std::log(max_epochs));
  return u;
}

neural::NetworkConfig SearchSpace::decode(const Encoding& u) const {
  neural::NetworkConfig c;
  const int n = round_in(u[0], min_layers, max_layers);
  c.hidden_sizes.clear();
  for (int i = 0; i < n; ++i) c.hidden_sizes.push_back(round_in(u[i + 1], min_neurons, max_neurons));
  const double lo = std::log10(min_learning_rate), hi = std::log10(max_learning_rate);
  c.learning_rate = std::clamp(std::pow(10.0, lo + std::clamp(u[5], 0.0, 1.0) * (hi - lo)),
                               min_learning_rate, max_learning_rate);
  const double elo = std::log(min_epochs), ehi = std::log(max_epochs);
  c.max_epochs = std::clamp(static_cast<int>(std::lround(std::exp(elo + std::clamp(u[6], 0.0, 1.0) * (ehi - elo)))),
                            min_epochs, max_epochs);
  return c;
}

bool SearchSpace::contains(const neural::NetworkConfig& c) const {
  const int n = static_cast<int>(c.hidden_sizes.size());
  if (n < min_layers || n > max_layers) return false;
  for (int h : c.hidden_sizes) {
    if (h < min_neurons || h > max_neurons) return false;
  }
  const double tol = 1e-12;
  return c.learning_rate >= min_learning_rate * (1 - tol) &&
         c.learning_rate <= max_learning_rate * (1 + tol) && c.max_epochs >= min_epochs &&
         c.max_epochs <= max_epochs;
}

std::string_view to_string(TrialStatus s) { return s == TrialStatus::ok ? "ok" : "failed"; }

bool better(const Trial& a, const Trial& b) {
  if (a.outcome.validation_mse != b.outcome.validation_mse) {
    return a.outcome.validation_mse < b.outcome.validation_mse;
  }
  if (a.parameter_count != b.parameter_count) return a.parameter_count < b.parameter_count;
  return a.id < b.id;
}

SearchResult random_search(const Evaluator& evaluate, int n_trials, const SearchOptions& options) {
  if (n_trials < 1) throw UsageError("random search needs at least one trial");
  options.space.validate();
  Rng rng(substream_seed(options.seed, "random-search"));
  std::vector<neural::NetworkConfig> configs;
  for (int i = 0; i < n_trials; ++i) configs.push_back(options.space.sample(rng));

  std::vector<Trial> trials(configs.size());
  std::vector<char> done(configs.size(), 0);
  std::size_t emitted = 0;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      Trial t = run_trial(evaluate, static_cast<int>(i), configs[i], options);
      std::lock_guard lock(mu);
      trials[i] = std::move(t);
      done[i] = 1;
      while (emitted < trials.size() && done[emitted]) {
        if (options.on_trial) options.on_trial(trials[emitted]);
        ++emitted;
      }
    }
  };
  const unsigned threads = std::clamp<unsigned>(options.threads, 1, static_cast<unsigned>(configs.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return finish(std::move(trials));
}

// ---------------------------------------------------------------------------

bool GaussianProcess::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpOptions& options) {
  if (x.cols() != y.size() || y.size() == 0) throw DataError("GP needs matching, nonempty data");
  x_ = x;
  options_ = options;
  const auto n = y.size();
  mean_ = y.mean();
  variance_ = n > 1 ? (y.array() - mean_).square().sum() / static_cast<double>(n - 1) : 0.0;
  if (!(variance_ > 0.0) || !std::isfinite(variance_)) variance_ = 1.0;

  Eigen::MatrixXd k(n, n);
  const double inv = 1.0 / (2.0 * options.length_scale * options.length_scale);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = k(j, i) = variance_ * std::exp(-(x.col(i) - x.col(j)).squaredNorm() * inv);
    }
  }
  const double noise = options.noise_ratio * variance_;
  for (double jitter = options.jitter; jitter <= options.max_jitter * (1 + 1e-9); jitter *= 10.0) {
    Eigen::MatrixXd kk = k;
    kk.diagonal().array() += noise + jitter;
    llt_.compute(kk);
    if (llt_.info() == Eigen::Success) {
      alpha_ = llt_.solve((y.array() - mean_).matrix());
      if (alpha_.allFinite()) {
        jitter_ = jitter;
        return true;
      }
    }
  }
  return false;
}

std::pair<double, double> GaussianProcess::predict(const Eigen::VectorXd& x) const {
  const double inv = 1.0 / (2.0 * options_.length_scale * options_.length_scale);
  Eigen::VectorXd ks(x_.cols());
  for (Eigen::Index i = 0; i < x_.cols(); ++i) {
    ks[i] = variance_ * std::exp(-(x_.col(i) - x).squaredNorm() * inv);
  }
  const double mean = mean_ + ks.dot(alpha_);
  const Eigen::VectorXd v = llt_.matrixL().solve(ks);
  const double var = variance_ - v.squaredNorm();
  return {mean, std::sqrt(std::max(var, 0.0))};
}

double expected_improvement(double mean, double sd, double best) {
  const double gain = best - mean;
  if (!(sd > 0.0)) return std::max(gain, 0.0);
  const double z = gain / sd;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return std::max(gain * cdf + sd * pdf, 0.0);
}

SearchResult bayes_search(const Evaluator& evaluate, int max_evals, const SearchOptions& options,
                          const BayesOptions& bayes) {
  if (max_evals < 5) throw UsageError("Bayesian optimization needs at least 5 evaluations");
  options.space.validate();
  const SearchSpace& space = options.space;
  Rng shift_rng(substream_seed(options.seed, "bayes-warmup"));
  Rng cand_rng(substream_seed(options.seed, "bayes-candidates"));
  Rng fallback_rng(substream_seed(options.seed, "bayes-fallback"));

  SearchSpace::Encoding shift;
  for (auto& s : shift) s = shift_rng.uniform();
  constexpr std::uint64_t primes[SearchSpace::dimension] = {2, 3, 5, 7, 11, 13, 17};

  std::vector<Trial> trials;
  auto record = [&](Trial t) {
    if (options.on_trial) options.on_trial(t);
    trials.push_back(std::move(t));
  };
  auto note = [&](const std::string& s) {
    if (options.on_note) options.on_note(s);
  };
  auto random_config = [&] {
    SearchSpace::Encoding u;
    for (auto& v : u) v = fallback_rng.uniform();
    return space.decode(u);
  };

  const int warmup = std::min(bayes.warmup, max_evals);
  for (int i = 0; i < warmup; ++i) {
    SearchSpace::Encoding u;
    for (int d = 0; d < SearchSpace::dimension; ++d) {
      const double h = radical_inverse(static_cast<std::uint64_t>(i) + 1, primes[d]) + shift[d];
      u[d] = h - std::floor(h);
    }
    record(run_trial(evaluate, i, space.decode(u), options));
  }

  auto seen = [&](const neural::NetworkConfig& c) {
    return std::any_of(trials.begin(), trials.end(), [&](const Trial& t) {
      return same_candidate(t.config, c) ||
             (options.epoch_cap && t.config.hidden_sizes == c.hidden_sizes &&
              t.config.learning_rate == c.learning_rate &&
              t.config.max_epochs == std::min(c.max_epochs, *options.epoch_cap));
    });
  };

  for (int i = warmup; i < max_evals; ++i) {
    std::vector<const Trial*> done;
    for (const auto& t : trials) {
      if (t.status == TrialStatus::ok) done.push_back(&t);
    }
    if (done.size() < 2) {
      note(fmt::format("trial {}: fewer than two completed trials, drawing at random", i));
      record(run_trial(evaluate, i, random_config(), options));
      continue;
    }
    Eigen::MatrixXd x(SearchSpace::dimension, static_cast<Eigen::Index>(done.size()));
    Eigen::VectorXd y(static_cast<Eigen::Index>(done.size()));
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < done.size(); ++j) {
      x.col(static_cast<Eigen::Index>(j)) = space.encode(done[j]->config);
      y[static_cast<Eigen::Index>(j)] = std::log(done[j]->outcome.validation_mse + 1e-12);
      best = std::min(best, y[static_cast<Eigen::Index>(j)]);
    }
    GaussianProcess gp;
    if (!gp.fit(x, y, bayes.gp)) {
      note(fmt::format("trial {}: GP factorization failed up to jitter {}, drawing at random", i,
                       bayes.gp.max_jitter));
      record(run_trial(evaluate, i, random_config(), options));
      continue;
    }

    auto propose = [&] {
      neural::NetworkConfig pick;
      double pick_ei = -1.0;
      for (int c = 0; c < bayes.candidates; ++c) {
        SearchSpace::Encoding u;
        for (auto& v : u) v = cand_rng.uniform();
        neural::NetworkConfig cfg = space.decode(u);
        const auto [m, s] = gp.predict(space.encode(cfg));
        const double ei = expected_improvement(m, s, best);
        if (ei > pick_ei) {
          pick_ei = ei;
          pick = std::move(cfg);
        }
      }
      return pick;
    };
    neural::NetworkConfig next = propose();
    if (seen(next)) next = propose();
    record(run_trial(evaluate, i, next, options));
  }
  return finish(std::move(trials));
}

double benchmark_objective(const neural::NetworkConfig& c) {
  double f = std::pow(std::log10(c.learning_rate) + 2.0, 2);
  for (int n : c.hidden_sizes) f += (n - 5.0) * (n - 5.0) / 64.0;
  return f;
}

Evaluator benchmark_evaluator() {
  return [](const neural::NetworkConfig& c) {
    TrialOutcome o;
    o.validation_mse = benchmark_objective(c);
    return o;
  };
}

Evaluator training_evaluator(const neural::Batch& train, const neural::Batch& validation,
                             const neural::Batch& test, const dataset::Scaler& scaler) {
  auto data = std::make_shared<const std::array<neural::Batch, 3>>(
      std::array<neural::Batch, 3>{train, validation, test});
  return [data, scaler](const neural::NetworkConfig& config) {
    neural::Network net = neural::Network::init(config);
    net.scaler = scaler;
    const auto& [tr, va, te] = *data;
    neural::train_bfgs(net, tr, va.size() > 0 ? &va : nullptr, config);
    TrialOutcome o;
    o.validation_mse = neural::loss(net, va.size() > 0 ? va : tr);
    if (te.size() > 0) o.test_mse = neural::loss(net, te);
    if (te.size() >= 3) {
      const auto rep = metrics::evaluate(net.forward(te.inputs), te.targets);
      o.pearson = rep.pearson_mean;
      o.spearman = rep.spearman_mean;
    }
    return o;
  };
}

// ---------------------------------------------------------------------------

std::vector<Trial> leaderboard(const std::vector<Trial>& trials) {
  std::vector<Trial> ranked;
  for (const auto& t : trials) {
    if (t.status == TrialStatus::ok) ranked.push_back(t);
  }
  std::stable_sort(ranked.begin(), ranked.end(), better);
  return ranked;
}

std::string format_leaderboard(const std::vector<Trial>& ranked, std::size_t limit) {
  auto opt = [](const std::optional<double>& v) {
    return v ? fmt::format("{:.4f}", *v) : std::string("n/a");
  };
  std::string out = fmt::format("{:>4} {:>5} {:<10} {:>9} {:>6} {:>6} {:>11} {:>11} {:>8} {:>8}\n",
                                "rank", "trial", "hidden", "lr", "epochs", "params", "val_mse",
                                "test_mse", "pearson", "spearman");
  for (std::size_t i = 0; i < ranked.size() && i < limit; ++i) {
    const Trial& t = ranked[i];
    out += fmt::format("{:>4} {:>5} {:<10} {:>9.3e} {:>6} {:>6} {:>11.4e} {:>11.4e} {:>8} {:>8}\n",
                       i + 1, t.id, fmt::format("{}", fmt::join(t.config.hidden_sizes, "-")),
                       t.config.learning_rate, t.config.max_epochs, t.parameter_count,
                       t.outcome.validation_mse, t.outcome.test_mse, opt(t.outcome.pearson),
                       opt(t.outcome.spearman));
  }
  return out;
}

std::string trial_csv_row(const Trial& t) {
  auto num = [](double v) { return std::isfinite(v) ? fmt::format("{}", v) : std::string(); };
  auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); };
  std::array<int, 4> n{};
  for (std::size_t i = 0; i < t.config.hidden_sizes.size() && i < 4; ++i) n[i] = t.config.hidden_sizes[i];
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3f}", t.id, t.config.hidden_sizes.size(),
                     n[0], n[1], n[2], n[3], t.config.learning_rate, t.config.max_epochs, t.config.seed,
                     num(t.outcome.validation_mse), num(t.outcome.test_mse), opt(t.outcome.pearson),
                     opt(t.outcome.spearman), to_string(t.status), t.wall_seconds);
}

TrialLog::TrialLog(const std::filesystem::path& path) : path_(path) {
  std::error_code ec;
  const bool fresh = !std::filesystem::exists(path_, ec) || std::filesystem::file_size(path_, ec) == 0;
  if (fresh) {
    std::ofstream out(path_);
    if (!out) throw DataError(fmt::format("cannot write {}", path_.string()));
    out << trial_csv_header << '\n';
  }
}

void TrialLog::append(const Trial& t) {
  std::ofstream out(path_, std::ios::app);
  if (!out) throw DataError(fmt::format("cannot append to {}", path_.string()));
  out << trial_csv_row(t) << '\n';
}

}  // namespace msr::hpo
