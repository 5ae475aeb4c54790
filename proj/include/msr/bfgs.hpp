#pragma once

#include <functional>

#include <Eigen/Dense>

namespace msr::optim {

/// Returns f(x) and writes the gradient into `grad`.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct WolfeOptions {
  double c1 = 1e-4;
  double c2 = 0.9;
  double expansion = 4.0;
  double max_step = 1e10;
  int max_evaluations = 40;
};

struct LineSearchResult {
  bool ok = false;
  double step = 0.0;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int evaluations = 0;
};

/// Bracketing + zoom search for a step satisfying the strong Wolfe conditions
/// along descent direction `dir` (f0, g0 are the values at x).
LineSearchResult strong_wolfe(const Objective& f, const Eigen::VectorXd& x, double f0,
                              const Eigen::VectorXd& g0, const Eigen::VectorXd& dir,
                              double initial_step, const WolfeOptions& options = {});

enum class BfgsStop { max_iterations, callback, line_search_failure, converged };

struct BfgsOptions {
  int max_iterations = 100;
  /// First trial step whenever the inverse Hessian is the identity (start,
  /// after a reset); 1 otherwise.
  double initial_step = 1.0;
  WolfeOptions wolfe;
  /// Curvature safeguard: s'y <= eps |s||y| resets the approximation.
  double curvature_epsilon = 1e-10;
  /// Stop when |g|_inf falls to this value.
  double gradient_tolerance = 0.0;
  /// Optional exact line search: step length minimizing f along p from x.
  std::function<double(const Eigen::VectorXd& x, const Eigen::VectorXd& p)> exact_step;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  int resets = 0;
  BfgsStop stop = BfgsStop::max_iterations;
};

/// Called after every accepted update with (iteration, x, f); return false to stop.
using BfgsCallback = std::function<bool(int, const Eigen::VectorXd&, double)>;

/// Quasi-Newton minimization with the inverse-Hessian BFGS update.
/// Throws NumericalError if the objective is non-finite at an accepted point.
BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options,
                         const BfgsCallback& on_iteration = {});

}  // namespace msr::optim
