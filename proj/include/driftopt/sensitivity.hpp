#pragma once

// Pathwise directional derivatives of the regulated process and of the
// composed cost, and the sample-average gradient over basis directions.
//
// At each index t the derivative of Gamma along u is
//   case 1:  u(t) + max_{s in argmin set} (-u(s))
//   case 2:  u(t)
// Case 2 applies when the argmin set is empty (path above tie_tol so far) or
// when it is exactly {0} with y(0) within tie_tol of zero and u(0) >= 0.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "driftopt/costs.hpp"
#include "driftopt/grid.hpp"
#include "driftopt/parallel.hpp"
#include "driftopt/paths.hpp"
#include "driftopt/regulator.hpp"
#include "driftopt/stats.hpp"
#include "driftopt/subspace.hpp"

namespace driftopt {

using DirectionPath = DiscretePath;

struct GradientEstimate {
  std::vector<double> coefficients;      // mean directional derivative per basis direction
  std::vector<double> sample_std_errors;
  std::size_t num_paths = 0;
};

namespace detail {

inline bool derivative_case2(const std::vector<double>& y, const ArgminScan& scan,
                             double u0, double tol) {
  if (scan.running_min() > tol) return true;
  const auto& active = scan.active();
  return active.size() == 1 && active[0] == 0 && y[0] <= tol && u0 >= 0.0;
}

}  // namespace detail

/// Directional derivative path of the regulator. tie_tol < 0 reuses the
/// tolerance the regulation was computed with.
inline DiscretePath d_gamma(const RegulatedOutput& reg, const DirectionPath& u,
                            double tie_tol = -1.0) {
  require_same_grid(reg.input, u, "d_gamma");
  const double tol = tie_tol < 0 ? reg.tie_tol : tie_tol;
  const std::vector<double>& y = reg.input.values;
  const std::size_t m = y.size();

  DiscretePath out;
  out.grid = u.grid;
  out.values.resize(m);
  ArgminScan scan(y, tol);
  double sup_neg_u = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < m; ++t) {
    switch (scan.advance(t)) {
      case ArgminScan::Event::Appended:
        sup_neg_u = std::max(sup_neg_u, -u.values[t]);
        break;
      case ArgminScan::Event::Rebuilt:
        sup_neg_u = -std::numeric_limits<double>::infinity();
        for (std::size_t s : scan.active()) sup_neg_u = std::max(sup_neg_u, -u.values[s]);
        break;
      case ArgminScan::Event::None:
        break;
    }
    out.values[t] = detail::derivative_case2(y, scan, u.values[0], tol)
                        ? u.values[t]
                        : u.values[t] + sup_neg_u;
  }
  return out;
}

/// Directional derivatives of the pathwise cost along every column of
/// `directions`, sharing one argmin sweep:
///   a1 * Quad(g'(Gamma) * DGamma) + a2 * G'(Gamma(T)) * DGamma(T).
inline std::vector<double> direction_costs(const RegulatedOutput& reg,
                                           const BasisMatrix& directions,
                                           const CostFunctionalSpec& cost) {
  cost.require_derivatives();
  const std::vector<double>& y = reg.input.values;
  const std::size_t m = y.size();
  const std::size_t n = directions.cols;
  if (directions.rows != m)
    throw std::invalid_argument("direction_costs: direction grid mismatch");

  const std::vector<double> w = trapezoid_weights(reg.input.grid);
  const double tol = reg.tie_tol;
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();

  std::vector<double> acc(n, 0.0);
  std::vector<double> sup(n, neg_inf);
  ArgminScan scan(y, tol);
  for (std::size_t t = 0; t < m; ++t) {
    switch (scan.advance(t)) {
      case ArgminScan::Event::Appended:
        for (std::size_t d = 0; d < n; ++d)
          sup[d] = std::max(sup[d], -directions(t, d));
        break;
      case ArgminScan::Event::Rebuilt:
        for (std::size_t d = 0; d < n; ++d) {
          double s = neg_inf;
          for (std::size_t idx : scan.active()) s = std::max(s, -directions(idx, d));
          sup[d] = s;
        }
        break;
      case ArgminScan::Event::None:
        break;
    }
    const bool argmin_is_empty = scan.running_min() > tol;
    const auto& active = scan.active();
    const bool zero_start_tie =
        !argmin_is_empty && active.size() == 1 && active[0] == 0 && y[0] <= tol;
    const double gamma_t = reg.regulated.values[t];
    const double run_w = cost.running_weight_a1 != 0.0
                             ? cost.running_weight_a1 * w[t] *
                                   cost.running_derivative(gamma_t)
                             : 0.0;
    const double term_w = (t + 1 == m && cost.terminal_weight_a2 != 0.0)
                              ? cost.terminal_weight_a2 *
                                    cost.terminal_derivative(gamma_t)
                              : 0.0;
    if (run_w == 0.0 && term_w == 0.0) continue;
    for (std::size_t d = 0; d < n; ++d) {
      const bool c2 =
          argmin_is_empty || (zero_start_tie && directions(0, d) >= 0.0);
      const double deriv = c2 ? directions(t, d) : directions(t, d) + sup[d];
      acc[d] += (run_w + term_w) * deriv;
    }
  }
  return acc;
}

/// Scalar directional derivative of the pathwise cost along one direction.
inline double d_cost(const RegulatedOutput& reg, const DirectionPath& u,
                     const CostFunctionalSpec& cost) {
  require_same_grid(reg.input, u, "d_cost");
  BasisMatrix dir;
  dir.rows = u.values.size();
  dir.cols = 1;
  dir.data = u.values;
  return direction_costs(reg, dir, cost)[0];
}

/// Sample-average gradient: per path, form y = Z_j + F, regulate once, and
/// evaluate the cost derivative along each basis direction; returns
/// per-direction means and standard errors over the batch. Reduction order
/// is fixed, so the result is independent of the thread count.
inline GradientEstimate saa_gradient(const PathBatch& batch, const DiscretePath& drift,
                                     const CostFunctionalSpec& cost,
                                     const BasisMatrix& directions,
                                     double tie_tol = -1.0) {
  if (batch.count() == 0) throw std::invalid_argument("saa_gradient: empty path batch");
  const std::size_t m = batch.grid().num_points();
  if (drift.values.size() != m || directions.rows != m)
    throw std::invalid_argument("saa_gradient: grid mismatch");
  const std::size_t n_paths = batch.count();
  const std::size_t n_dirs = directions.cols;

  std::vector<double> per_path(n_paths * n_dirs);
  parallel_for(n_paths, [&](std::size_t j) {
    std::vector<double> scratch;
    const auto z = batch.path(j, scratch);
    DiscretePath y;
    y.grid = batch.grid();
    y.values.resize(m);
    for (std::size_t i = 0; i < m; ++i) y.values[i] = z[i] + drift.values[i];
    const RegulatedOutput reg = skorokhod_regulate(y, tie_tol);
    const std::vector<double> c = direction_costs(reg, directions, cost);
    for (std::size_t d = 0; d < n_dirs; ++d) {
      if (!std::isfinite(c[d]))
        throw NumericError("saa_gradient: non-finite pathwise derivative (path " +
                           std::to_string(j) + ")");
      per_path[j * n_dirs + d] = c[d];
    }
  });

  GradientEstimate est;
  est.num_paths = n_paths;
  est.coefficients.resize(n_dirs);
  est.sample_std_errors.resize(n_dirs);
  std::vector<double> column(n_paths);
  for (std::size_t d = 0; d < n_dirs; ++d) {
    for (std::size_t j = 0; j < n_paths; ++j) column[j] = per_path[j * n_dirs + d];
    const MeanAndError me = mean_and_std_error(column);
    est.coefficients[d] = me.mean;
    est.sample_std_errors[d] = me.std_error;
  }
  return est;
}

inline GradientEstimate saa_gradient(const PathBatch& batch, const DriftFunction& F,
                                     const CostFunctionalSpec& cost,
                                     const BasisSpec& directions, double tie_tol = -1.0) {
  const BasisMatrix dirs = evaluate_basis(directions, batch.grid());
  const DiscretePath drift = evaluate_drift(F, batch.grid());
  return saa_gradient(batch, drift, cost, dirs, tie_tol);
}

}  // namespace driftopt
