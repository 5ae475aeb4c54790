#include "msr/neural.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "msr/bfgs.hpp"
#include "msr/error.hpp"
#include "msr/random.hpp"

namespace msr::neural {
namespace {

Eigen::MatrixXd logsig(const Eigen::MatrixXd& z) {
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

// Column-wise softmax with max subtraction, renormalized.
Eigen::MatrixXd softmax(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd e = (z.rowwise() - z.colwise().maxCoeff()).array().exp().matrix();
  const Eigen::RowVectorXd sums = e.colwise().sum();
  e.array().rowwise() /= sums.array();
  return e;
}

std::vector<int> layer_sizes(const std::vector<int>& hidden) {
  std::vector<int> sizes{input_size};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output_size);
  return sizes;
}

// Activations of every layer, starting with the input.
std::vector<Eigen::MatrixXd> forward_all(const Network& net, const Eigen::MatrixXd& x) {
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(net.layers.size() + 1);
  acts.push_back(x);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Eigen::MatrixXd z = net.layers[l].weights * acts.back();
    z.colwise() += net.layers[l].bias;
    acts.push_back(l + 1 == net.layers.size() ? softmax(z) : logsig(z));
  }
  return acts;
}

}  // namespace

void NetworkConfig::validate() const {
  if (hidden_sizes.empty()) throw UsageError("network needs at least one hidden layer");
  for (int h : hidden_sizes) {
    if (h < 1) throw UsageError(fmt::format("hidden layer size must be >= 1 (got {})", h));
  }
  if (max_epochs < 1) throw UsageError(fmt::format("max_epochs must be >= 1 (got {})", max_epochs));
  if (!(learning_rate > 0.0)) {
    throw UsageError(fmt::format("learning rate must be > 0 (got {})", learning_rate));
  }
  if (patience && *patience < 1) throw UsageError("patience must be >= 1");
}

std::vector<std::string> NetworkConfig::warnings() const {
  std::vector<std::string> out;
  if (learning_rate < 1e-4 || learning_rate > 1e-1) {
    out.push_back(fmt::format("learning rate {} is outside the searched range [1e-4, 1e-1]",
                              learning_rate));
  }
  if (hidden_sizes.size() > 4) out.push_back("more than 4 hidden layers");
  for (int h : hidden_sizes) {
    if (h > 8) out.push_back(fmt::format("hidden layer of {} neurons exceeds the searched range", h));
  }
  return out;
}

Network Network::zeros(const std::vector<int>& hidden_sizes) {
  Network net;
  net.config.hidden_sizes = hidden_sizes;
  const auto sizes = layer_sizes(hidden_sizes);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    net.layers.push_back({Eigen::MatrixXd::Zero(sizes[l + 1], sizes[l]),
                          Eigen::VectorXd::Zero(sizes[l + 1])});
  }
  return net;
}

Network Network::init(const NetworkConfig& config) {
  config.validate();
  Network net = zeros(config.hidden_sizes);
  net.config = config;
  Rng rng(config.seed);
  for (auto& layer : net.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.weights.rows() + layer.weights.cols()));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        layer.weights(r, c) = rng.uniform(-bound, bound);
      }
    }
  }
  return net;
}

Eigen::MatrixXd Network::forward(const Eigen::MatrixXd& normalized) const {
  Eigen::MatrixXd a = normalized;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = layers[l].weights * a;
    z.colwise() += layers[l].bias;
    a = l + 1 == layers.size() ? softmax(z) : logsig(z);
  }
  return a;
}

GasComposition Network::forward(const dataset::Inputs& normalized) const {
  const Eigen::Map<const Eigen::VectorXd> x(normalized.data(), input_size);
  const Eigen::VectorXd y = forward(Eigen::MatrixXd(x));
  GasComposition g;
  for (int k = 0; k < output_size; ++k) g.fractions[k] = y(k);
  return g.renormalized();
}

GasComposition Network::predict(const dataset::Inputs& raw) const { return forward(scaler.apply(raw)); }

std::vector<int> Network::hidden_sizes() const {
  std::vector<int> out;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) out.push_back(static_cast<int>(layers[l].bias.size()));
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

Eigen::VectorXd Network::flatten() const {
  Eigen::VectorXd p(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) p(k++) = l.weights(r, c);
    }
    p.segment(k, l.bias.size()) = l.bias;
    k += l.bias.size();
  }
  return p;
}

void Network::unflatten(const Eigen::VectorXd& p) {
  if (p.size() != static_cast<Eigen::Index>(parameter_count())) {
    throw DataError(fmt::format("parameter vector has {} entries, network needs {}", p.size(),
                                parameter_count()));
  }
  Eigen::Index k = 0;
  for (auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = p(k++);
    }
    l.bias = p.segment(k, l.bias.size());
    k += l.bias.size();
  }
}

Batch Batch::from(const std::vector<dataset::DataRecord>& records, const dataset::Scaler& scaler) {
  Batch b;
  const auto n = static_cast<Eigen::Index>(records.size());
  b.inputs.resize(input_size, n);
  b.targets.resize(output_size, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    const auto x = scaler.apply(r.inputs);
    for (int k = 0; k < input_size; ++k) b.inputs(k, i) = x[k];
    for (int k = 0; k < output_size; ++k) b.targets(k, i) = r.target.fractions[k];
  }
  return b;
}

double loss(const Network& net, const Batch& data) {
  if (data.size() == 0) throw DataError("loss of an empty dataset");
  return (net.forward(data.inputs) - data.targets).squaredNorm() /
         static_cast<double>(data.targets.size());
}

double loss_and_gradient(const Network& net, const Batch& data, Eigen::VectorXd& grad) {
  if (data.size() == 0) throw DataError("gradient of an empty dataset");
  const auto acts = forward_all(net, data.inputs);
  const Eigen::MatrixXd diff = acts.back() - data.targets;
  const double count = static_cast<double>(data.targets.size());
  const double value = diff.squaredNorm() / count;

  // Through the softmax: dz = y .* (dy - sum(y .* dy)).
  const Eigen::MatrixXd& y = acts.back();
  const Eigen::MatrixXd dy = (2.0 / count) * diff;
  const Eigen::RowVectorXd inner = (y.array() * dy.array()).colwise().sum();
  Eigen::MatrixXd delta = (y.array() * (dy.rowwise() - inner).array()).matrix();

  grad.resize(static_cast<Eigen::Index>(net.parameter_count()));
  // Offsets of each layer's block in the flat vector.
  std::vector<Eigen::Index> offset(net.layers.size() + 1, 0);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    offset[l + 1] = offset[l] + net.layers[l].weights.size() + net.layers[l].bias.size();
  }
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const Eigen::MatrixXd gw = delta * acts[l].transpose();
    const auto& w = net.layers[l].weights;
    Eigen::Index k = offset[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) grad(k++) = gw(r, c);
    }
    grad.segment(k, w.rows()) = delta.rowwise().sum();
    if (l > 0) {
      const Eigen::MatrixXd& a = acts[l];
      delta = ((w.transpose() * delta).array() * a.array() * (1.0 - a.array())).matrix();
    }
  }
  return value;
}

Eigen::VectorXd gradient(const Network& net, const Batch& data) {
  Eigen::VectorXd g;
  loss_and_gradient(net, data, g);
  return g;
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::max_epochs: return "max_epochs";
    case StopReason::patience: return "patience";
    case StopReason::line_search_failure: return "line-search-failure";
  }
  return "max_epochs";
}

TrainReport train_bfgs(Network& net, const Batch& train, const Batch* validation,
                       const NetworkConfig& config) {
  config.validate();
  if (train.size() == 0) throw DataError("training set is empty");
  const auto start = std::chrono::steady_clock::now();
  const bool has_val = validation != nullptr && validation->size() > 0;

  TrainReport rep;
  rep.initial_train_loss = loss(net, train);
  if (has_val) rep.initial_validation_loss = loss(net, *validation);
  rep.train_loss.reserve(static_cast<std::size_t>(config.max_epochs));

  Network work = net;
  const optim::Objective objective = [&](const Eigen::VectorXd& p, Eigen::VectorXd& g) {
    work.unflatten(p);
    return loss_and_gradient(work, train, g);
  };

  optim::BfgsOptions opts;
  opts.max_iterations = config.max_epochs;
  opts.initial_step = config.learning_rate;

  double prev_val = rep.initial_validation_loss;
  int increases = 0;
  bool patience_hit = false;
  const auto on_epoch = [&](int, const Eigen::VectorXd& p, double f) {
    rep.train_loss.push_back(f);
    if (has_val) {
      work.unflatten(p);
      const double v = loss(work, *validation);
      rep.validation_loss.push_back(v);
      increases = v > prev_val ? increases + 1 : 0;
      prev_val = v;
      if (config.patience && increases >= *config.patience) {
        patience_hit = true;
        return false;
      }
    }
    return true;
  };

  optim::BfgsResult res;
  try {
    res = optim::minimize_bfgs(objective, net.flatten(), opts, on_epoch);
  } catch (const NumericalError& e) {
    throw NumericalError(fmt::format("training aborted after {} epochs: {}", rep.train_loss.size(),
                                     e.what()));
  }
  net.unflatten(res.x);
  net.config = config;
  net.train_epochs = res.iterations;
  rep.epochs = res.iterations;
  rep.resets = res.resets;
  rep.stop = patience_hit ? StopReason::patience
             : res.stop == optim::BfgsStop::line_search_failure ? StopReason::line_search_failure
                                                                 : StopReason::max_epochs;
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

void write_history(const std::filesystem::path& path, const TrainReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << "epoch,train_mse,val_mse\n";
  out << fmt::format("0,{},{}\n", report.initial_train_loss,
                     report.validation_loss.empty() ? std::string() : fmt::format("{}", report.initial_validation_loss));
  for (std::size_t i = 0; i < report.train_loss.size(); ++i) {
    out << fmt::format("{},{},{}\n", i + 1, report.train_loss[i],
                       i < report.validation_loss.size() ? fmt::format("{}", report.validation_loss[i])
                                                         : std::string());
  }
}

std::string to_json(const Network& net) {
  nlohmann::ordered_json j;
  j["schema_version"] = model_schema_version;
  j["hidden_sizes"] = net.hidden_sizes();
  j["scaler"] = {{"min", net.scaler.min()}, {"max", net.scaler.max()}};
  auto weights = nlohmann::ordered_json::array();
  auto biases = nlohmann::ordered_json::array();
  for (const auto& l : net.layers) {
    std::vector<double> w;
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    }
    weights.push_back(w);
    biases.push_back(std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size()));
  }
  j["weights"] = weights;
  j["biases"] = biases;
  j["seed"] = net.config.seed;
  j["learning_rate"] = net.config.learning_rate;
  j["train_epochs"] = net.train_epochs;
  return j.dump(1) + "\n";
}

Network from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object() || !j.contains("schema_version")) {
      throw DataError("model file: missing schema_version");
    }
    const int version = j.at("schema_version").get<int>();
    if (version != model_schema_version) {
      throw DataError(fmt::format("model file: unsupported schema_version {} (expected {})", version,
                                  model_schema_version));
    }
    Network net = Network::zeros(j.at("hidden_sizes").get<std::vector<int>>());
    net.config.hidden_sizes = net.hidden_sizes();
    const auto lo = j.at("scaler").at("min").get<dataset::Inputs>();
    const auto hi = j.at("scaler").at("max").get<dataset::Inputs>();
    net.scaler = dataset::Scaler(lo, hi);
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != net.layers.size() || biases.size() != net.layers.size()) {
      throw DataError("model file: layer count does not match hidden_sizes");
    }
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      auto& layer = net.layers[l];
      const auto w = weights[l].get<std::vector<double>>();
      const auto b = biases[l].get<std::vector<double>>();
      if (w.size() != static_cast<std::size_t>(layer.weights.size()) ||
          b.size() != static_cast<std::size_t>(layer.bias.size())) {
        throw DataError(fmt::format("model file: layer {} has the wrong shape", l));
      }
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = w[k++];
      }
      for (std::size_t i = 0; i < b.size(); ++i) layer.bias(static_cast<Eigen::Index>(i)) = b[i];
    }
    if (!net.flatten().allFinite()) throw DataError("model file: non-finite parameters");
    net.config.seed = j.value("seed", std::uint64_t{0});
    net.config.learning_rate = j.value("learning_rate", net.config.learning_rate);
    net.train_epochs = j.value("train_epochs", 0);
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("model file: {}", e.what()));
  }
}

void save(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write model '{}'", path.string()));
  out << to_json(net);
}

Network load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open model '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

}  // namespace msr::neural
