#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "msr/bfgs.hpp"
#include "msr/error.hpp"
#include "msr/neural.hpp"
#include "msr/random.hpp"

using namespace msr;
using namespace msr::neural;

namespace {

Batch random_batch(Rng& rng, int n) {
  Batch b;
  b.inputs = Eigen::MatrixXd(input_size, n);
  b.targets = Eigen::MatrixXd(output_size, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < input_size; ++i) b.inputs(i, j) = rng.uniform();
    double s = 0.0;
    for (int k = 0; k < output_size; ++k) s += b.targets(k, j) = rng.uniform(0.01, 1.0);
    b.targets.col(j) /= s;
  }
  return b;
}

Network random_net(Rng& rng, std::vector<int> hidden, double scale = 1.5) {
  Network net = Network::zeros(hidden);
  Eigen::VectorXd p(net.parameter_count());
  for (auto& v : p) v = rng.uniform(-scale, scale);
  net.unflatten(p);
  return net;
}

Batch corpus_batch() {
  // small smooth mapping that a few-unit network can fit
  Rng rng(7);
  Batch b;
  const int n = 60;
  b.inputs = Eigen::MatrixXd(input_size, n);
  b.targets = Eigen::MatrixXd(output_size, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < input_size; ++i) b.inputs(i, j) = rng.uniform();
    Eigen::Vector4d z(b.inputs(0, j), -b.inputs(1, j), 0.5 * b.inputs(2, j), b.inputs(3, j) * b.inputs(4, j));
    z = z.array().exp();
    b.targets.col(j) = z / z.sum();
  }
  return b;
}

}  // namespace

TEST_CASE("init is seeded, shaped and bounded") {
  NetworkConfig cfg;
  Network a = Network::init(cfg);
  Network b = Network::init(cfg);
  CHECK(a.flatten() == b.flatten());

  REQUIRE(a.layers.size() == 4);
  const std::pair<int, int> shapes[] = {{6, 5}, {8, 6}, {6, 8}, {4, 6}};
  for (std::size_t l = 0; l < 4; ++l) {
    CHECK(a.layers[l].weights.rows() == shapes[l].first);
    CHECK(a.layers[l].weights.cols() == shapes[l].second);
    CHECK(a.layers[l].bias.size() == shapes[l].first);
    const double bound = std::sqrt(6.0 / (shapes[l].first + shapes[l].second));
    CHECK(a.layers[l].weights.cwiseAbs().maxCoeff() <= bound);
    CHECK(a.layers[l].bias.cwiseAbs().maxCoeff() <= bound);
  }
  CHECK(a.parameter_count() == 6 * 5 + 6 + 8 * 6 + 8 + 6 * 8 + 6 + 4 * 6 + 4);
  CHECK(a.hidden_sizes() == std::vector<int>{6, 8, 6});

  cfg.seed = 43;
  CHECK(Network::init(cfg).flatten() != a.flatten());
}

TEST_CASE("config validation") {
  NetworkConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.warnings().empty());
  cfg.hidden_sizes = {};
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg.hidden_sizes = {3, 0};
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg.hidden_sizes = {3};
  cfg.max_epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg.max_epochs = 10;
  cfg.learning_rate = 0.714;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.warnings().size() == 1);
}

TEST_CASE("forward output is a composition") {
  Network z = Network::zeros({6, 8, 6});
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    dataset::Inputs x;
    for (auto& v : x) v = rng.uniform();
    const GasComposition g = z.forward(x);
    for (double f : g.fractions) CHECK(f == doctest::Approx(0.25).epsilon(1e-15));
  }

  for (int t = 0; t < 1000; ++t) {
    std::vector<int> hidden(static_cast<std::size_t>(rng.integer(1, 4)));
    for (auto& h : hidden) h = static_cast<int>(rng.integer(1, 8));
    Network net = random_net(rng, hidden, 4.0);
    dataset::Inputs x;
    for (auto& v : x) v = rng.uniform();
    const GasComposition g = net.forward(x);
    CHECK(std::abs(g.sum() - 1.0) <= 1e-12);
    for (double f : g.fractions) {
      CHECK(f > 0.0);
      CHECK(f < 1.0);
    }
  }
}

TEST_CASE("output bias shift leaves softmax unchanged") {
  Rng rng(11);
  Network net = random_net(rng, {3, 4});
  Batch b = random_batch(rng, 25);
  const Eigen::MatrixXd before = net.forward(b.inputs);
  net.layers.back().bias.array() += 3.7;
  const Eigen::MatrixXd after = net.forward(b.inputs);
  CHECK((before - after).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("batch and single forward agree") {
  Rng rng(12);
  Network net = random_net(rng, {5, 2});
  Batch b = random_batch(rng, 8);
  const Eigen::MatrixXd out = net.forward(b.inputs);
  for (int j = 0; j < 8; ++j) {
    dataset::Inputs x;
    for (int i = 0; i < input_size; ++i) x[static_cast<std::size_t>(i)] = b.inputs(i, j);
    const GasComposition g = net.forward(x);
    for (int k = 0; k < output_size; ++k) CHECK(g.fractions[static_cast<std::size_t>(k)] == doctest::Approx(out(k, j)).epsilon(1e-14));
  }
}

TEST_CASE("loss examples") {
  Network z = Network::zeros({2});
  Batch one;
  one.inputs = Eigen::MatrixXd::Constant(input_size, 1, 0.5);
  one.targets = Eigen::MatrixXd::Zero(output_size, 1);
  one.targets(0, 0) = 1.0;
  CHECK(loss(z, one) == doctest::Approx(0.1875).epsilon(1e-15));

  one.targets = Eigen::MatrixXd::Constant(output_size, 1, 0.25);
  CHECK(loss(z, one) == doctest::Approx(0.0).scale(1.0).epsilon(1e-16));

  Batch empty;
  empty.inputs = Eigen::MatrixXd(input_size, 0);
  empty.targets = Eigen::MatrixXd(output_size, 0);
  CHECK_THROWS_AS(loss(z, empty), DataError);

  Rng rng(5);
  Network net = random_net(rng, {4, 3});
  Batch b = random_batch(rng, 40);
  Batch p = b;
  std::vector<int> perm(40);
  for (int i = 0; i < 40; ++i) perm[static_cast<std::size_t>(i)] = 39 - ((i * 7) % 40);
  for (int j = 0; j < 40; ++j) {
    p.inputs.col(j) = b.inputs.col(perm[static_cast<std::size_t>(j)]);
    p.targets.col(j) = b.targets.col(perm[static_cast<std::size_t>(j)]);
  }
  CHECK(loss(net, p) == doctest::Approx(loss(net, b)).epsilon(1e-13));
}

TEST_CASE("gradient matches central differences") {
  Rng rng(2024);
  for (int t = 0; t < 50; ++t) {
    std::vector<int> hidden(static_cast<std::size_t>(rng.integer(1, 3)));
    for (auto& h : hidden) h = static_cast<int>(rng.integer(2, 4));
    Network net = random_net(rng, hidden);
    Batch b = random_batch(rng, 7);
    const Eigen::VectorXd g = gradient(net, b);
    Eigen::VectorXd p = net.flatten();
    Eigen::VectorXd fd(p.size());
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      Network probe = net;
      Eigen::VectorXd q = p;
      q[i] = p[i] + h;
      probe.unflatten(q);
      const double up = loss(probe, b);
      q[i] = p[i] - h;
      probe.unflatten(q);
      const double down = loss(probe, b);
      fd[i] = (up - down) / (2 * h);
    }
    const double rel = (g - fd).norm() / std::max(g.norm(), fd.norm());
    CHECK(rel < 1e-6);

    Eigen::VectorXd g2;
    CHECK(loss_and_gradient(net, b, g2) == loss(net, b));
    CHECK(g2 == g);
  }
}

TEST_CASE("gradient has mean semantics") {
  Rng rng(8);
  Network net = random_net(rng, {3, 3});
  Batch b = random_batch(rng, 12);
  Batch d;
  d.inputs = Eigen::MatrixXd(input_size, 24);
  d.targets = Eigen::MatrixXd(output_size, 24);
  d.inputs << b.inputs, b.inputs;
  d.targets << b.targets, b.targets;
  CHECK((gradient(net, d) - gradient(net, b)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(loss(net, d) == doctest::Approx(loss(net, b)).epsilon(1e-14));
}

TEST_CASE("gradient vanishes at a symmetric stationary point") {
  Rng rng(9);
  Network net = random_net(rng, {4, 5});
  net.layers.back().weights.setZero();
  net.layers.back().bias.setConstant(0.3);
  Batch b = random_batch(rng, 10);
  b.targets.setConstant(0.25);
  CHECK(gradient(net, b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("flatten and unflatten are inverse") {
  Rng rng(10);
  Network net = random_net(rng, {2, 7, 1});
  const Eigen::VectorXd p = net.flatten();
  CHECK(p.size() == static_cast<Eigen::Index>(net.parameter_count()));
  Network other = Network::zeros({2, 7, 1});
  other.unflatten(p);
  CHECK(other.flatten() == p);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    CHECK(other.layers[l].weights == net.layers[l].weights);
    CHECK(other.layers[l].bias == net.layers[l].bias);
  }
  // row-major weights then bias
  CHECK(p[1] == net.layers[0].weights(0, 1));
  CHECK(p[5] == net.layers[0].weights(1, 0));
  CHECK(p[10] == net.layers[0].bias[0]);
  CHECK_THROWS(other.unflatten(Eigen::VectorXd::Zero(p.size() - 1)));
}

TEST_CASE("bfgs with exact line search solves a quadratic in dim steps") {
  Rng rng(77);
  const int n = 8;
  Eigen::MatrixXd m(n, n);
  for (auto& v : m.reshaped()) v = rng.uniform(-1.0, 1.0);
  const Eigen::MatrixXd a = m * m.transpose() + Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd c(n);
  for (auto& v : c) v = rng.uniform(-1.0, 1.0);
  const Eigen::VectorXd solution = a.ldlt().solve(c);

  optim::Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = a * x - c;
    return 0.5 * x.dot(a * x) - c.dot(x);
  };
  optim::BfgsOptions opts;
  opts.max_iterations = n;
  opts.exact_step = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& p) {
    return -(a * x - c).dot(p) / p.dot(a * p);
  };
  const auto res = optim::minimize_bfgs(f, Eigen::VectorXd::Zero(n), opts);
  CHECK(res.iterations <= n);
  CHECK((res.x - solution).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("strong wolfe search on a one-dimensional problem") {
  optim::Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Constant(1, 4 * std::pow(x[0] - 3.0, 3));
    return std::pow(x[0] - 3.0, 4);
  };
  Eigen::VectorXd x = Eigen::VectorXd::Zero(1), g0;
  const double f0 = f(x, g0);
  const Eigen::VectorXd dir = -g0;
  for (double step : {1e-6, 1e-3, 1.0, 100.0}) {
    const auto r = optim::strong_wolfe(f, x, f0, g0, dir, step);
    REQUIRE(r.ok);
    CHECK(r.value <= f0 + 1e-4 * r.step * g0.dot(dir));
    CHECK(std::abs(r.gradient.dot(dir)) <= 0.9 * std::abs(g0.dot(dir)));
  }
}

TEST_CASE("training decreases loss monotonically and is deterministic") {
  const Batch b = corpus_batch();
  NetworkConfig cfg;
  cfg.hidden_sizes = {4};
  cfg.max_epochs = 150;
  cfg.learning_rate = 0.01;
  Network a = Network::init(cfg);
  const auto ra = train_bfgs(a, b, &b, cfg);
  CHECK(ra.epochs == static_cast<int>(ra.train_loss.size()));
  CHECK(ra.validation_loss.size() == ra.train_loss.size());
  CHECK(ra.train_loss.front() <= ra.initial_train_loss);
  for (std::size_t i = 1; i < ra.train_loss.size(); ++i) CHECK(ra.train_loss[i] <= ra.train_loss[i - 1]);
  CHECK(ra.train_loss.back() < 0.2 * ra.initial_train_loss);
  CHECK(a.train_epochs == ra.epochs);

  Network b2 = Network::init(cfg);
  const auto rb = train_bfgs(b2, b, nullptr, cfg);
  CHECK(b2.flatten() == a.flatten());
  CHECK(rb.train_loss == ra.train_loss);
  CHECK(rb.validation_loss.empty());
}

TEST_CASE("one epoch is one update") {
  const Batch b = corpus_batch();
  NetworkConfig cfg;
  cfg.hidden_sizes = {3};
  cfg.max_epochs = 1;
  Network net = Network::init(cfg);
  const Eigen::VectorXd before = net.flatten();
  const auto rep = train_bfgs(net, b, nullptr, cfg);
  CHECK(rep.epochs == 1);
  CHECK(rep.train_loss.size() == 1);
  CHECK(rep.stop == StopReason::max_epochs);
  CHECK(net.flatten() != before);
}

TEST_CASE("patience stops on rising validation loss") {
  const Batch train = corpus_batch();
  Batch val = train;
  // a validation set with inverted targets disagrees with training progress
  for (int j = 0; j < val.size(); ++j) val.targets.col(j) = val.targets.col(j).reverse();
  NetworkConfig cfg;
  cfg.hidden_sizes = {4};
  cfg.max_epochs = 500;
  cfg.patience = 2;
  Network net = Network::init(cfg);
  const auto rep = train_bfgs(net, train, &val, cfg);
  REQUIRE(rep.stop == StopReason::patience);
  const auto& v = rep.validation_loss;
  REQUIRE(v.size() >= 2);
  const std::size_t n = v.size();
  CHECK(v[n - 1] > v[n - 2]);
  CHECK(v[n - 2] > (n >= 3 ? v[n - 3] : rep.initial_validation_loss));
  CHECK(to_string(StopReason::line_search_failure) == "line-search-failure");
}

TEST_CASE("model file round trip is exact") {
  Rng rng(31);
  Network net = random_net(rng, {6, 8, 6});
  net.layers[0].weights(0, 0) = 0.1 + 0.2;
  net.layers[1].bias[2] = 1e-300;
  net.scaler = dataset::Scaler({773.15, 0.1, 1, 0, 1e-5}, {1073.15, 20, 4, 6, 2e-4});
  net.config.seed = 99;
  net.train_epochs = 123;

  const std::string text = to_json(net);
  const Network back = from_json(text);
  CHECK(back.flatten() == net.flatten());
  CHECK(back.scaler == net.scaler);
  CHECK(back.hidden_sizes() == net.hidden_sizes());
  CHECK(back.config.seed == 99);
  CHECK(back.train_epochs == 123);
  CHECK(to_json(back) == text);

  const auto path = std::filesystem::temp_directory_path() / "msr_test_model.json";
  save(net, path);
  CHECK(load(path).flatten() == net.flatten());
  std::filesystem::remove(path);

  std::string bad = text;
  const auto pos = bad.find("\"schema_version\": 1");
  REQUIRE(pos != std::string::npos);
  bad.replace(pos, 19, "\"schema_version\": 7");
  CHECK_THROWS_AS(from_json(bad), DataError);
  CHECK_THROWS_AS(from_json("{}"), DataError);
  CHECK_THROWS_AS(from_json("not json"), DataError);
  CHECK_THROWS_AS(load("/nonexistent/model.json"), DataError);
}

TEST_CASE("forward derivative converges as h shrinks") {
  Rng rng(4);
  Network net = random_net(rng, {6, 8, 6}, 2.0);
  for (int axis = 0; axis < input_size; ++axis) {
    dataset::Inputs x{0.3, 0.6, 0.2, 0.5, 0.7};
    auto deriv = [&](double h) {
      dataset::Inputs up = x, down = x;
      up[static_cast<std::size_t>(axis)] += h;
      down[static_cast<std::size_t>(axis)] -= h;
      return (net.forward(up).fractions[0] - net.forward(down).fractions[0]) / (2 * h);
    };
    const double e1 = std::abs(deriv(1e-2) - deriv(5e-3));
    const double e2 = std::abs(deriv(5e-3) - deriv(2.5e-3));
    // central differences are O(h^2)
    CHECK(e2 <= 0.3 * e1 + 1e-11);
  }
}
