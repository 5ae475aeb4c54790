#include "msr/bfgs.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "msr/error.hpp"

namespace msr::optim {
namespace {

struct Sample {
  double step = 0.0;
  double value = 0.0;
  double slope = 0.0;  // directional derivative
  Eigen::VectorXd gradient;
};

// Minimizer of the cubic through (a, fa, da), (b, fb, db), or NaN.
double cubic_minimizer(const Sample& a, const Sample& b) {
  const double d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.step - b.step);
  const double disc = d1 * d1 - a.slope * b.slope;
  if (disc < 0.0) return std::nan("");
  const double d2 = std::copysign(std::sqrt(disc), b.step - a.step);
  return b.step - (b.step - a.step) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
}

}  // namespace

LineSearchResult strong_wolfe(const Objective& f, const Eigen::VectorXd& x, double f0,
                              const Eigen::VectorXd& g0, const Eigen::VectorXd& dir,
                              double initial_step, const WolfeOptions& opt) {
  LineSearchResult res;
  const double d0 = g0.dot(dir);
  if (!(d0 < 0.0)) return res;

  Eigen::VectorXd trial_grad(x.size());
  auto eval = [&](double step) {
    Sample s;
    s.step = step;
    s.value = f(x + step * dir, trial_grad);
    s.gradient = trial_grad;
    s.slope = std::isfinite(s.value) ? trial_grad.dot(dir) : std::nan("");
    ++res.evaluations;
    return s;
  };
  auto armijo = [&](const Sample& s) {
    return std::isfinite(s.value) && s.value <= f0 + opt.c1 * s.step * d0;
  };
  auto curvature = [&](const Sample& s) { return std::abs(s.slope) <= -opt.c2 * d0; };
  auto accept = [&](const Sample& s) {
    res.ok = true;
    res.step = s.step;
    res.value = s.value;
    res.gradient = s.gradient;
    return res;
  };

  auto zoom = [&](Sample lo, Sample hi) {
    while (res.evaluations < opt.max_evaluations) {
      const double width = hi.step - lo.step;
      double step = std::isfinite(hi.value) ? cubic_minimizer(lo, hi) : std::nan("");
      const double a = std::min(lo.step, hi.step), b = std::max(lo.step, hi.step);
      const double margin = 0.1 * (b - a);
      if (!std::isfinite(step) || step < a + margin || step > b - margin) {
        step = lo.step + 0.5 * width;
      }
      if (step == lo.step || step == hi.step) break;
      Sample s = eval(step);
      if (!armijo(s) || s.value >= lo.value) {
        hi = s;
      } else {
        if (curvature(s)) return accept(s);
        if (s.slope * (hi.step - lo.step) >= 0.0) hi = lo;
        lo = s;
      }
    }
    // Out of budget: keep the best point with sufficient decrease, if any.
    if (lo.step > 0.0 && armijo(lo)) return accept(lo);
    return res;
  };

  Sample prev;
  prev.step = 0.0;
  prev.value = f0;
  prev.slope = d0;
  prev.gradient = g0;
  double step = initial_step;
  for (int i = 0; res.evaluations < opt.max_evaluations; ++i) {
    Sample s = eval(step);
    if (!armijo(s) || (i > 0 && s.value >= prev.value)) return zoom(prev, s);
    if (curvature(s)) return accept(s);
    if (s.slope >= 0.0) return zoom(s, prev);
    if (step >= opt.max_step) return accept(s);
    prev = s;
    step = std::min(step * opt.expansion, opt.max_step);
  }
  if (prev.step > 0.0) return accept(prev);
  return res;
}

BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options,
                         const BfgsCallback& on_iteration) {
  const Eigen::Index n = x0.size();
  BfgsResult out;
  out.x = std::move(x0);
  Eigen::VectorXd g(n);
  double fx = f(out.x, g);
  if (!std::isfinite(fx) || !g.allFinite()) {
    throw NumericalError(fmt::format("BFGS: non-finite objective {} at the starting point", fx));
  }
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  bool identity = true;
  out.value = fx;

  for (int it = 0; it < options.max_iterations; ++it) {
    if (options.gradient_tolerance > 0.0 && g.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance) {
      out.stop = BfgsStop::converged;
      return out;
    }
    Eigen::VectorXd p = -h * g;
    if (!(g.dot(p) < 0.0)) {
      h.setIdentity();
      identity = true;
      ++out.resets;
      p = -g;
    }

    LineSearchResult ls;
    if (options.exact_step) {
      const double step = options.exact_step(out.x, p);
      ls.step = step;
      ls.gradient.resize(n);
      ls.value = f(out.x + step * p, ls.gradient);
      ls.ok = std::isfinite(ls.value) && step > 0.0;
    } else {
      ls = strong_wolfe(f, out.x, fx, g, p, identity ? options.initial_step : 1.0, options.wolfe);
      if (!ls.ok && !identity) {
        h.setIdentity();
        identity = true;
        ++out.resets;
        p = -g;
        ls = strong_wolfe(f, out.x, fx, g, p, options.initial_step, options.wolfe);
      }
    }
    if (!ls.ok) {
      out.stop = BfgsStop::line_search_failure;
      return out;
    }
    if (!std::isfinite(ls.value) || !ls.gradient.allFinite()) {
      throw NumericalError(fmt::format("BFGS: non-finite objective at iteration {} (last finite {})",
                                       it + 1, fx));
    }

    const Eigen::VectorXd s = ls.step * p;
    const Eigen::VectorXd y = ls.gradient - g;
    out.x += s;
    fx = ls.value;
    g = ls.gradient;
    out.value = fx;
    out.iterations = it + 1;

    const double sy = s.dot(y);
    if (sy > options.curvature_epsilon * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h * y;
      const double yhy = y.dot(hy);
      h.noalias() += (rho + rho * rho * yhy) * (s * s.transpose());
      h.noalias() -= rho * (hy * s.transpose() + s * hy.transpose());
      identity = false;
    } else {
      h.setIdentity();
      identity = true;
      ++out.resets;
    }

    if (on_iteration && !on_iteration(out.iterations, out.x, fx)) {
      out.stop = BfgsStop::callback;
      return out;
    }
  }
  out.stop = BfgsStop::max_iterations;
  return out;
}

}  // namespace msr::optim
