#pragma once

// Finite-dimensional drift subspaces: basis functions on [0, T] vanishing at
// t = 0, coefficient-space feasible sets, and the empirical projection-error
// curve that instantiates the approximation rate for the budget allocator.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "driftopt/grid.hpp"
#include "driftopt/rng.hpp"

namespace driftopt {

enum class BasisKind { IntegratedLegendre, PiecewiseLinearHat, Monomial };

struct BasisSpec {
  BasisKind kind = BasisKind::IntegratedLegendre;
  std::size_t dimension_n = 1;
  double horizon_T = 1.0;

  void validate() const {
    if (dimension_n < 1) throw std::invalid_argument("BasisSpec: dimension must be >= 1");
    if (!(horizon_T > 0)) throw std::invalid_argument("BasisSpec: horizon must be positive");
  }
};

/// Column-major (num_points x n) matrix of basis values on a grid.
struct BasisMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  double operator()(std::size_t r, std::size_t c) const { return data[c * rows + r]; }
  double& at(std::size_t r, std::size_t c) { return data[c * rows + r]; }
  std::span<const double> col(std::size_t c) const { return {&data[c * rows], rows}; }
};

namespace detail {

/// Legendre values L_0..L_max at x via the three-term recurrence.
inline void legendre_values(double x, std::span<double> out) {
  out[0] = 1.0;
  if (out.size() > 1) out[1] = x;
  for (std::size_t m = 1; m + 1 < out.size(); ++m) {
    const double mm = static_cast<double>(m);
    out[m + 1] = ((2.0 * mm + 1.0) * x * out[m] - mm * out[m - 1]) / (mm + 1.0);
  }
}

}  // namespace detail

/// Basis columns evaluated on the grid. Every column vanishes at t = 0.
///  - IntegratedLegendre: P_j(t) = integral_0^t L_{j-1}(2s/T - 1) ds, in
///    closed form through the antiderivative identity of the recurrence.
///  - PiecewiseLinearHat: hats on n+1 equal knots with the t=0 hat removed.
///  - Monomial: P_j(t) = (t/T)^j.
inline BasisMatrix evaluate_basis(const BasisSpec& spec, const GridSpec& grid) {
  spec.validate();
  const std::size_t m = grid.num_points();
  const std::size_t n = spec.dimension_n;
  const double T = spec.horizon_T;
  BasisMatrix out;
  out.rows = m;
  out.cols = n;
  out.data.assign(m * n, 0.0);

  switch (spec.kind) {
    case BasisKind::IntegratedLegendre: {
      std::vector<double> leg(n + 1);
      for (std::size_t i = 0; i < m; ++i) {
        const double t = grid.time(i);
        const double x = 2.0 * t / T - 1.0;
        detail::legendre_values(x, leg);
        out.at(i, 0) = t;  // integral of L_0
        for (std::size_t j = 2; j <= n; ++j)
          out.at(i, j - 1) =
              0.5 * T * (leg[j] - leg[j - 2]) / (2.0 * static_cast<double>(j) - 1.0);
      }
      break;
    }
    case BasisKind::PiecewiseLinearHat: {
      const double knot = T / static_cast<double>(n);
      for (std::size_t i = 0; i < m; ++i) {
        const double t = grid.time(i);
        for (std::size_t j = 1; j <= n; ++j) {
          const double center = static_cast<double>(j) * knot;
          out.at(i, j - 1) = std::max(0.0, 1.0 - std::abs(t - center) / knot);
        }
      }
      break;
    }
    case BasisKind::Monomial: {
      for (std::size_t i = 0; i < m; ++i) {
        const double r = grid.time(i) / T;
        double p = 1.0;
        for (std::size_t j = 1; j <= n; ++j) {
          p *= r;
          out.at(i, j - 1) = p;
        }
      }
      break;
    }
  }
  for (std::size_t j = 0; j < n; ++j) out.at(0, j) = 0.0;
  return out;
}

/// Closed-form sup-norm bound of P_j (1-based j).
inline double basis_sup_norm_bound(const BasisSpec& spec, std::size_t j) {
  switch (spec.kind) {
    case BasisKind::IntegratedLegendre:
      return j == 1 ? spec.horizon_T
                    : spec.horizon_T / (2.0 * static_cast<double>(j) - 1.0);
    case BasisKind::PiecewiseLinearHat:
    case BasisKind::Monomial:
      return 1.0;
  }
  return 0.0;
}

inline std::vector<double> column_sup_norms(const BasisMatrix& b) {
  std::vector<double> s(b.cols, 0.0);
  for (std::size_t j = 0; j < b.cols; ++j)
    for (double v : b.col(j)) s[j] = std::max(s[j], std::abs(v));
  return s;
}

struct DriftFunction {
  BasisSpec basis;
  std::vector<double> coefficients;
};

inline DiscretePath evaluate_drift(const DriftFunction& f, const BasisMatrix& basis,
                                   const GridSpec& grid) {
  if (f.coefficients.size() != basis.cols || basis.rows != grid.num_points())
    throw std::invalid_argument("evaluate_drift: dimension mismatch");
  DiscretePath p;
  p.grid = grid;
  p.values.assign(basis.rows, 0.0);
  for (std::size_t j = 0; j < basis.cols; ++j) {
    const double a = f.coefficients[j];
    if (a == 0.0) continue;
    const auto col = basis.col(j);
    for (std::size_t i = 0; i < basis.rows; ++i) p.values[i] += a * col[i];
  }
  p.values[0] = 0.0;
  return p;
}

inline DiscretePath evaluate_drift(const DriftFunction& f, const GridSpec& grid) {
  return evaluate_drift(f, evaluate_basis(f.basis, grid), grid);
}

enum class FeasibleKind { L2Ball, Box };

/// Closed bounded convex coefficient set: a Euclidean ball or a box.
struct FeasibleSetSpec {
  FeasibleKind kind = FeasibleKind::L2Ball;
  double radius = 1.0;
  std::vector<double> lower, upper;  // box only

  static FeasibleSetSpec ball(double R) {
    if (!(R > 0)) throw std::invalid_argument("FeasibleSetSpec: radius must be positive");
    FeasibleSetSpec f;
    f.kind = FeasibleKind::L2Ball;
    f.radius = R;
    return f;
  }
  static FeasibleSetSpec box(std::vector<double> lo, std::vector<double> hi) {
    if (lo.size() != hi.size() || lo.empty())
      throw std::invalid_argument("FeasibleSetSpec: box bounds size mismatch");
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (!(lo[i] <= hi[i]))
        throw std::invalid_argument("FeasibleSetSpec: empty box interval");
    FeasibleSetSpec f;
    f.kind = FeasibleKind::Box;
    f.lower = std::move(lo);
    f.upper = std::move(hi);
    return f;
  }

  void check_dimension(std::size_t n) const {
    if (kind == FeasibleKind::Box && lower.size() != n)
      throw std::invalid_argument("FeasibleSetSpec: box dimension mismatch");
  }

  bool contains(std::span<const double> a, double slack = 0.0) const {
    if (kind == FeasibleKind::L2Ball) {
      double s = 0;
      for (double v : a) s += v * v;
      return std::sqrt(s) <= radius + slack;
    }
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] < lower[i] - slack || a[i] > upper[i] + slack) return false;
    return true;
  }

  double coefficient_diameter(std::size_t n) const {
    if (kind == FeasibleKind::L2Ball) return 2.0 * radius;
    check_dimension(n);
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += (upper[i] - lower[i]) * (upper[i] - lower[i]);
    return std::sqrt(s);
  }
};

/// Euclidean projection: radial scaling for the ball, clamping for the box.
/// Idempotent; returns the nearest feasible point.
inline std::vector<double> project_feasible(std::vector<double> a,
                                            const FeasibleSetSpec& feas) {
  for (double v : a)
    if (!std::isfinite(v)) throw std::invalid_argument("project_feasible: non-finite input");
  if (feas.kind == FeasibleKind::L2Ball) {
    double s = 0;
    for (double v : a) s += v * v;
    const double norm = std::sqrt(s);
    // the tolerance band keeps the projection idempotent under rounding
    if (norm > feas.radius * (1.0 + 1e-12)) {
      const double scale = feas.radius / norm;
      for (double& v : a) v *= scale;
    }
    return a;
  }
  feas.check_dimension(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    a[i] = std::clamp(a[i], feas.lower[i], feas.upper[i]);
  return a;
}

/// Exact sup-norm diameter of the induced function set, evaluated on the grid:
/// ball: 2R max_t ||P(t)||_2;  box: 2 max_t sum_j w_j |P_j(t)|.
inline double feasible_sup_diameter(const FeasibleSetSpec& feas, const BasisMatrix& basis) {
  double best = 0.0;
  for (std::size_t i = 0; i < basis.rows; ++i) {
    double v = 0.0;
    if (feas.kind == FeasibleKind::L2Ball) {
      for (std::size_t j = 0; j < basis.cols; ++j) v += basis(i, j) * basis(i, j);
      v = 2.0 * feas.radius * std::sqrt(v);
    } else {
      feas.check_dimension(basis.cols);
      for (std::size_t j = 0; j < basis.cols; ++j)
        v += (feas.upper[j] - feas.lower[j]) * std::abs(basis(i, j));
    }
    best = std::max(best, v);
  }
  return best;
}

/// max over feasible coefficients of ||F||_inf, evaluated on the grid.
inline double feasible_drift_sup_bound(const FeasibleSetSpec& feas,
                                       const BasisMatrix& basis) {
  double best = 0.0;
  for (std::size_t i = 0; i < basis.rows; ++i) {
    double v = 0.0;
    if (feas.kind == FeasibleKind::L2Ball) {
      for (std::size_t j = 0; j < basis.cols; ++j) v += basis(i, j) * basis(i, j);
      v = feas.radius * std::sqrt(v);
    } else {
      feas.check_dimension(basis.cols);
      for (std::size_t j = 0; j < basis.cols; ++j)
        v += std::max(std::abs(feas.lower[j]), std::abs(feas.upper[j])) *
             std::abs(basis(i, j));
    }
    best = std::max(best, v);
  }
  return best;
}

/// Uniform draw from the feasible set (ball: polar method; box: per-coordinate).
inline std::vector<double> random_feasible(const FeasibleSetSpec& feas, std::size_t n,
                                           CounterRng& rng) {
  std::vector<double> a(n);
  if (feas.kind == FeasibleKind::L2Ball) {
    double norm2 = 0;
    for (auto& v : a) {
      v = rng.normal();
      norm2 += v * v;
    }
    const double norm = std::sqrt(norm2);
    const double r =
        feas.radius * std::pow(rng.uniform01(), 1.0 / static_cast<double>(n));
    for (auto& v : a) v = norm == 0 ? 0 : v / norm * r;
    return a;
  }
  feas.check_dimension(n);
  for (std::size_t i = 0; i < n; ++i)
    a[i] = feas.lower[i] + (feas.upper[i] - feas.lower[i]) * rng.uniform01();
  return a;
}

struct ConditioningError : std::runtime_error {
  double condition_estimate;
  explicit ConditioningError(const std::string& msg, double cond)
      : std::runtime_error(msg), condition_estimate(cond) {}
};

struct ProjectionErrorPoint {
  std::size_t n;
  double sup_residual;
};

/// Least-squares fit of `target` on the first n basis columns for each n,
/// reporting the sup-norm residual on the grid. Rank deficiency raises
/// ConditioningError with a condition estimate from the R diagonal.
inline std::vector<ProjectionErrorPoint> projection_error_curve(
    const DiscretePath& target, BasisKind kind, std::span<const std::size_t> n_values) {
  if (n_values.empty())
    throw std::invalid_argument("projection_error_curve: no subspace sizes");
  const std::size_t n_max = *std::max_element(n_values.begin(), n_values.end());
  BasisSpec spec{kind, n_max, target.grid.horizon()};
  const BasisMatrix basis = evaluate_basis(spec, target.grid);
  const std::size_t m = basis.rows;

  Eigen::MatrixXd A(m, n_max);
  for (std::size_t j = 0; j < n_max; ++j)
    for (std::size_t i = 0; i < m; ++i) A(i, j) = basis(i, j);
  Eigen::VectorXd b(m);
  for (std::size_t i = 0; i < m; ++i) b(i) = target.values[i];

  std::vector<ProjectionErrorPoint> curve;
  curve.reserve(n_values.size());
  for (std::size_t n : n_values) {
    if (n < 1 || n > n_max)
      throw std::invalid_argument("projection_error_curve: bad subspace size");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A.leftCols(n));
    if (static_cast<std::size_t>(qr.rank()) < n) {
      const auto& R = qr.matrixR();
      const double cond =
          std::abs(R(0, 0)) /
          std::max(std::abs(R(static_cast<Eigen::Index>(n) - 1,
                              static_cast<Eigen::Index>(n) - 1)),
                   1e-300);
      throw ConditioningError("projection_error_curve: rank-deficient basis matrix", cond);
    }
    const Eigen::VectorXd coef = qr.solve(b);
    const Eigen::VectorXd resid = b - A.leftCols(n) * coef;
    curve.push_back({n, resid.cwiseAbs().maxCoeff()});
  }
  return curve;
}

}  // namespace driftopt
