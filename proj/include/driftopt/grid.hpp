#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace driftopt {

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Uniform time grid on [0, T] with step h. When T/h is not integral an
/// extra node is appended so the last node is exactly T (shorter final step).
/// Copies are cheap; the node vector is shared and immutable.
class GridSpec {
 public:
  GridSpec() = default;
  GridSpec(double T, double h, std::vector<double> nodes)
      : horizon_T_(T),
        step_h_(h),
        times_(std::make_shared<const std::vector<double>>(std::move(nodes))) {}

  double horizon() const { return horizon_T_; }
  double step() const { return step_h_; }
  std::size_t num_points() const { return times_ ? times_->size() : 0; }
  double time(std::size_t i) const { return (*times_)[i]; }
  std::span<const double> times() const {
    if (!times_) return {};
    return {times_->data(), times_->size()};
  }
  bool same_as(const GridSpec& other) const {
    if (times_ == other.times_) return true;
    if (!times_ || !other.times_) return false;
    return *times_ == *other.times_;
  }

 private:
  double horizon_T_ = 0.0;
  double step_h_ = 0.0;
  std::shared_ptr<const std::vector<double>> times_;
};

inline GridSpec make_grid(double T, double h) {
  if (!(T > 0.0) || !std::isfinite(T))
    throw std::invalid_argument("make_grid: horizon must be positive");
  if (!(h > 0.0) || !std::isfinite(h) || h > T)
    throw std::invalid_argument("make_grid: step must satisfy 0 < h <= T");
  const double q = T / h;
  const auto whole = static_cast<std::size_t>(std::floor(q + 1e-9));
  std::vector<double> nodes(whole + 1);
  for (std::size_t i = 0; i <= whole; ++i) nodes[i] = static_cast<double>(i) * h;
  if (q - static_cast<double>(whole) <= 1e-9) {
    nodes[whole] = T;  // integral division: clamp the last node
  } else {
    nodes.push_back(T);
  }
  return GridSpec(T, h, std::move(nodes));
}

/// Values of a scalar path on a grid.
struct DiscretePath {
  GridSpec grid;
  std::vector<double> values;

  double sup_norm() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
  double terminal() const { return values.back(); }
};

inline void require_same_grid(const DiscretePath& a, const DiscretePath& b,
                              const char* where) {
  if (a.values.size() != b.values.size() || !a.grid.same_as(b.grid))
    throw std::invalid_argument(std::string(where) + ": grid mismatch");
}

/// Trapezoidal quadrature weights for the (possibly clamped) grid.
inline std::vector<double> trapezoid_weights(const GridSpec& g) {
  const std::size_t m = g.num_points();
  std::vector<double> w(m, 0.0);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    const double dt = g.time(i + 1) - g.time(i);
    w[i] += 0.5 * dt;
    w[i + 1] += 0.5 * dt;
  }
  return w;
}

}  // namespace driftopt
