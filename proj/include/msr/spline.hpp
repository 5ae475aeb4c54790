#pragma once

#include <span>
#include <vector>

namespace msr {

/// Natural cubic spline (zero second derivative at both ends).
class NaturalCubicSpline {
 public:
  /// `xs` strictly increasing, at least 3 knots.
  NaturalCubicSpline(std::span<const double> xs, std::span<const double> ys);

  double operator()(double x) const;

  double x_min() const { return xs_.front(); }
  double x_max() const { return xs_.back(); }

 private:
  std::vector<double> xs_, ys_, m_;  // m_: second derivatives at knots
};

}  // namespace msr
