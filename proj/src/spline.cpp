#include "msr/spline.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "msr/error.hpp"

namespace msr {

NaturalCubicSpline::NaturalCubicSpline(std::span<const double> xs, std::span<const double> ys)
    : xs_(xs.begin(), xs.end()), ys_(ys.begin(), ys.end()), m_(xs.size(), 0.0) {
  const std::size_t n = xs_.size();
  if (n != ys_.size()) throw DataError("spline: knot and value counts differ");
  if (n < 3) throw DataError(fmt::format("spline: need at least 3 knots (got {})", n));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (!(xs_[i + 1] > xs_[i])) throw DataError("spline: knots must be strictly increasing");
  }

  // Tridiagonal system for interior second derivatives (Thomas algorithm).
  std::vector<double> diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = xs_[i] - xs_[i - 1];
    const double h1 = xs_[i + 1] - xs_[i];
    const double lower = h0 / 6.0;
    diag[i] = (h0 + h1) / 3.0;
    upper[i] = h1 / 6.0;
    rhs[i] = (ys_[i + 1] - ys_[i]) / h1 - (ys_[i] - ys_[i - 1]) / h0;
    if (i > 1) {
      const double w = lower / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
  }
  for (std::size_t i = n - 2; i >= 1; --i) {
    m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
  }
}

double NaturalCubicSpline::operator()(double x) const {
  const auto it = std::upper_bound(xs_.begin() + 1, xs_.end() - 1, x);
  const std::size_t k = static_cast<std::size_t>(it - xs_.begin()) - 1;
  const double h = xs_[k + 1] - xs_[k];
  const double a = (xs_[k + 1] - x) / h;
  const double b = (x - xs_[k]) / h;
  return a * ys_[k] + b * ys_[k + 1] +
         ((a * a * a - a) * m_[k] + (b * b * b - b) * m_[k + 1]) * h * h / 6.0;
}

}  // namespace msr
