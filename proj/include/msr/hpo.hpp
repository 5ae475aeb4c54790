#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msr/neural.hpp"
#include "msr/random.hpp"

namespace msr::hpo {

/// Network architecture and training budget ranges.
struct SearchSpace {
  int min_layers = 1, max_layers = 4;
  int min_neurons = 1, max_neurons = 8;
  double min_learning_rate = 1e-4, max_learning_rate = 1e-1;
  int min_epochs = 100, max_epochs = 40000;

  static constexpr int dimension = 7;
  using Encoding = Eigen::Matrix<double, dimension, 1>;

  void validate() const;

  /// Independent draw: layers and neurons uniform, learning rate
  /// log-uniform, epochs uniform.
  neural::NetworkConfig sample(Rng& rng) const;

  /// Unit-cube coordinates: layers, four neuron slots (0 when inactive),
  /// log learning rate, log epochs.
  Encoding encode(const neural::NetworkConfig& config) const;
  /// Rounds integer coordinates and clamps everything into range.
  neural::NetworkConfig decode(const Encoding& u) const;

  bool contains(const neural::NetworkConfig& config) const;
};

enum class TrialStatus { ok, failed };

std::string_view to_string(TrialStatus s);

struct TrialOutcome {
  double validation_mse = 0.0;
  double test_mse = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> pearson;
  std::optional<double> spearman;
};

struct Trial {
  int id = 0;
  neural::NetworkConfig config;
  TrialStatus status = TrialStatus::ok;
  TrialOutcome outcome;
  std::size_t parameter_count = 0;
  double wall_seconds = 0.0;
  std::string note;
};

/// Trains (or directly scores) one configuration. Throwing NumericalError
/// marks the trial failed.
using Evaluator = std::function<TrialOutcome(const neural::NetworkConfig&)>;

struct SearchOptions {
  SearchSpace space;
  std::uint64_t seed = 42;
  /// Training budget cap applied to every sampled epoch count.
  std::optional<int> epoch_cap;
  /// Concurrent trials for random search.
  unsigned threads = 1;
  /// Called once per finished trial, in trial order.
  std::function<void(const Trial&)> on_trial;
  /// Called for GP fallbacks and similar events.
  std::function<void(const std::string&)> on_note;
};

struct SearchResult {
  std::vector<Trial> trials;
  std::optional<Trial> best;
};

/// Lower validation MSE wins, then fewer parameters, then lower trial id.
bool better(const Trial& a, const Trial& b);

SearchResult random_search(const Evaluator& evaluate, int n_trials, const SearchOptions& options);

// ---------------------------------------------------------------------------
// Gaussian process and Bayesian optimization
// ---------------------------------------------------------------------------

struct GpOptions {
  double length_scale = 0.3;
  double noise_ratio = 1e-6;  // noise variance as a fraction of signal variance
  double jitter = 1e-10;
  double max_jitter = 1e-4;
};

/// Zero-mean GP on centred targets with a squared-exponential kernel.
class GaussianProcess {
 public:
  /// Returns false when the kernel cannot be factored even at max jitter.
  bool fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpOptions& options = {});

  /// Posterior mean and standard deviation at one point.
  std::pair<double, double> predict(const Eigen::VectorXd& x) const;

  double jitter_used() const { return jitter_; }

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd alpha_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  GpOptions options_;
  double mean_ = 0.0;
  double variance_ = 1.0;
  double jitter_ = 0.0;
};

/// Expected improvement below `best` for a Gaussian prediction.
double expected_improvement(double mean, double sd, double best);

struct BayesOptions {
  int warmup = 8;
  int candidates = 2048;
  GpOptions gp;
};

SearchResult bayes_search(const Evaluator& evaluate, int max_evals, const SearchOptions& options,
                          const BayesOptions& bayes = {});

/// Smooth test objective: (log10 lr + 2)^2 + sum over layers of (n - 5)^2 / 64.
double benchmark_objective(const neural::NetworkConfig& config);
Evaluator benchmark_evaluator();

/// Trains on `train`, scores validation MSE for selection and test metrics
/// for the report.
Evaluator training_evaluator(const neural::Batch& train, const neural::Batch& validation,
                             const neural::Batch& test, const dataset::Scaler& scaler);

// ---------------------------------------------------------------------------
// Reporting
// ---------------------------------------------------------------------------

/// Completed trials, best first.
std::vector<Trial> leaderboard(const std::vector<Trial>& trials);
std::string format_leaderboard(const std::vector<Trial>& ranked, std::size_t limit = 10);

inline constexpr std::string_view trial_csv_header =
    "trial_id,n_layers,n1,n2,n3,n4,lr,epochs,seed,val_mse,test_mse,pearson,spearman,status,wall_s";

std::string trial_csv_row(const Trial& trial);

/// Appends rows to a CSV log, writing the header when the file is new.
class TrialLog {
 public:
  explicit TrialLog(const std::filesystem::path& path);
  void append(const Trial& trial);

 private:
  std::filesystem::path path_;
};

}  // namespace msr::hpo
