#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msr/dataset.hpp"
#include "msr/types.hpp"

namespace msr::neural {

inline constexpr int input_size = static_cast<int>(dataset::input_count);
inline constexpr int output_size = static_cast<int>(GasComposition::size);

struct NetworkConfig {
  std::vector<int> hidden_sizes{6, 8, 6};
  double learning_rate = 0.001;  // first line-search step
  int max_epochs = 20000;
  std::uint64_t seed = 42;
  std::optional<int> patience;  // consecutive validation-loss increases

  void validate() const;
  /// Non-fatal notes, e.g. a learning rate outside the search range.
  std::vector<std::string> warnings() const;
};

struct Layer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;
};

/// Feed-forward network: log-sigmoid hidden layers, softmax output.
class Network {
 public:
  Network() = default;

  /// Uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases, seeded.
  static Network init(const NetworkConfig& config);
  /// All parameters zero.
  static Network zeros(const std::vector<int>& hidden_sizes);

  /// Composition for one normalized input vector.
  GasComposition forward(const dataset::Inputs& normalized) const;
  /// Columns are samples: 5 x N in, 4 x N out.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& normalized) const;

  /// Raw inputs, normalized with the embedded scaler.
  GasComposition predict(const dataset::Inputs& raw) const;

  std::vector<int> hidden_sizes() const;
  std::size_t parameter_count() const;

  /// Layer-by-layer: row-major weights, then bias.
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& params);

  std::vector<Layer> layers;
  dataset::Scaler scaler;
  NetworkConfig config;
  int train_epochs = 0;
};

/// Normalized inputs and targets as column matrices.
struct Batch {
  Eigen::MatrixXd inputs;   // 5 x N
  Eigen::MatrixXd targets;  // 4 x N

  static Batch from(const std::vector<dataset::DataRecord>& records, const dataset::Scaler& scaler);
  Eigen::Index size() const { return inputs.cols(); }
};

/// Mean over records and components of the squared error.
double loss(const Network& net, const Batch& data);

/// Analytic gradient of `loss` with respect to the flattened parameters.
Eigen::VectorXd gradient(const Network& net, const Batch& data);

double loss_and_gradient(const Network& net, const Batch& data, Eigen::VectorXd& grad);

enum class StopReason { max_epochs, patience, line_search_failure };

std::string_view to_string(StopReason r);

struct TrainReport {
  double initial_train_loss = 0.0;
  double initial_validation_loss = 0.0;
  std::vector<double> train_loss;       // after each accepted update
  std::vector<double> validation_loss;  // empty without validation data
  StopReason stop = StopReason::max_epochs;
  int epochs = 0;
  int resets = 0;
  double wall_seconds = 0.0;
};

/// Full-batch BFGS training; one epoch is one accepted quasi-Newton update.
/// Throws NumericalError on a non-finite loss.
TrainReport train_bfgs(Network& net, const Batch& train, const Batch* validation,
                       const NetworkConfig& config);

/// Writes the per-epoch history as CSV (epoch, train_mse, val_mse).
void write_history(const std::filesystem::path& path, const TrainReport& report);

// Model file -----------------------------------------------------------------

inline constexpr int model_schema_version = 1;

std::string to_json(const Network& net);
Network from_json(std::string_view text);

void save(const Network& net, const std::filesystem::path& path);
Network load(const std::filesystem::path& path);

}  // namespace msr::neural
