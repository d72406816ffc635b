#pragma once

// Pathwise cost functionals of the form
//   a1 * integral_0^T g(z(s)) ds + a2 * G(z(T))
// (trapezoidal quadrature for the integral) and the sample-average objective
// over regulated shifted paths.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "driftopt/grid.hpp"
#include "driftopt/parallel.hpp"
#include "driftopt/paths.hpp"
#include "driftopt/regulator.hpp"
#include "driftopt/stats.hpp"
#include "driftopt/subspace.hpp"

namespace driftopt {

struct UnsupportedCostError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CostFunctionalSpec {
  double running_weight_a1 = 0.0;
  double terminal_weight_a2 = 0.0;
  std::function<double(double)> running_fn;
  std::function<double(double)> running_derivative;
  std::function<double(double)> terminal_fn;
  std::function<double(double)> terminal_derivative;
  bool convex_flag = false;  // caller-asserted: g, G convex nondecreasing
  std::string name = "custom";

  void require_derivatives() const {
    if (running_weight_a1 != 0.0 && !running_derivative)
      throw UnsupportedCostError("cost '" + name + "': missing running-cost derivative");
    if (terminal_weight_a2 != 0.0 && !terminal_derivative)
      throw UnsupportedCostError("cost '" + name + "': missing terminal-cost derivative");
  }
};

inline CostFunctionalSpec cost_linear(double a1 = 1.0, double a2 = 1.0) {
  CostFunctionalSpec c;
  c.running_weight_a1 = a1;
  c.terminal_weight_a2 = a2;
  c.running_fn = [](double x) { return x; };
  c.running_derivative = [](double) { return 1.0; };
  c.terminal_fn = [](double x) { return x; };
  c.terminal_derivative = [](double) { return 1.0; };
  c.convex_flag = true;
  c.name = "linear";
  return c;
}

inline CostFunctionalSpec cost_quadratic(double a1 = 1.0, double a2 = 1.0) {
  CostFunctionalSpec c;
  c.running_weight_a1 = a1;
  c.terminal_weight_a2 = a2;
  c.running_fn = [](double x) { return x * x; };
  c.running_derivative = [](double x) { return 2.0 * x; };
  c.terminal_fn = [](double x) { return x * x; };
  c.terminal_derivative = [](double x) { return 2.0 * x; };
  // convex and nondecreasing on the nonnegative range reached by regulated paths
  c.convex_flag = true;
  c.name = "quadratic";
  return c;
}

inline CostFunctionalSpec cost_terminal_tracking(double target, double a2 = 1.0) {
  CostFunctionalSpec c;
  c.running_weight_a1 = 0.0;
  c.terminal_weight_a2 = a2;
  c.running_fn = [](double) { return 0.0; };
  c.running_derivative = [](double) { return 0.0; };
  c.terminal_fn = [target](double x) { return (x - target) * (x - target); };
  c.terminal_derivative = [target](double x) { return 2.0 * (x - target); };
  c.convex_flag = false;  // decreasing below the target
  c.name = "terminal_tracking";
  return c;
}

namespace detail {

/// Cost of the regulated shifted path, fused with the regulation sweep;
/// no allocation. `weights` are the trapezoid weights of the grid.
inline double regulated_cost_kernel(std::span<const double> z,
                                    std::span<const double> drift,
                                    std::span<const double> weights,
                                    const CostFunctionalSpec& cost) {
  const std::size_t m = z.size();
  const bool running = cost.running_weight_a1 != 0.0;
  double min_so_far = std::numeric_limits<double>::infinity();
  double quad = 0.0;
  double gamma = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double y = drift.empty() ? z[i] : z[i] + drift[i];
    min_so_far = std::min(min_so_far, y);
    gamma = y + std::max(0.0, -min_so_far);
    if (running) quad += weights[i] * cost.running_fn(gamma);
  }
  double total = cost.running_weight_a1 * quad;
  if (cost.terminal_weight_a2 != 0.0)
    total += cost.terminal_weight_a2 * cost.terminal_fn(gamma);
  return total;
}

}  // namespace detail

inline double pathwise_cost(const DiscretePath& z, const CostFunctionalSpec& cost) {
  const std::size_t m = z.values.size();
  if (m == 0 || m != z.grid.num_points())
    throw std::invalid_argument("pathwise_cost: path/grid size mismatch");
  double total = 0.0;
  if (cost.running_weight_a1 != 0.0) {
    const std::vector<double> w = trapezoid_weights(z.grid);
    double quad = 0.0;
    for (std::size_t i = 0; i < m; ++i) quad += w[i] * cost.running_fn(z.values[i]);
    total += cost.running_weight_a1 * quad;
  }
  if (cost.terminal_weight_a2 != 0.0)
    total += cost.terminal_weight_a2 * cost.terminal_fn(z.values.back());
  if (!std::isfinite(total)) throw NumericError("pathwise_cost: non-finite value");
  return total;
}

/// Costs of the regulated shifted paths Gamma(Z_j + F), one entry per path.
inline std::vector<double> per_path_costs(const PathBatch& batch,
                                          const DiscretePath& drift,
                                          const CostFunctionalSpec& cost,
                                          double tie_tol = -1.0) {
  (void)tie_tol;  // regulated values do not depend on the tie tolerance
  if (batch.count() == 0) throw std::invalid_argument("per_path_costs: empty batch");
  if (drift.values.size() != batch.grid().num_points() ||
      !drift.grid.same_as(batch.grid()))
    throw std::invalid_argument("per_path_costs: drift grid mismatch");
  const std::size_t n_paths = batch.count();
  const std::vector<double> weights = trapezoid_weights(batch.grid());
  std::vector<double> out(n_paths);
  parallel_for(n_paths, [&](std::size_t j) {
    static thread_local std::vector<double> scratch;
    const auto z = batch.path(j, scratch);
    const double v = detail::regulated_cost_kernel(z, drift.values, weights, cost);
    if (!std::isfinite(v))
      throw NumericError("per_path_costs: non-finite cost (path " + std::to_string(j) +
                         ")");
    out[j] = v;
  });
  return out;
}

/// Mean cost over the batch at a raw drift path; single-threaded kernel loop
/// meant to be called from an outer parallel context.
inline double mean_regulated_cost_serial(const PathBatch& batch,
                                         std::span<const double> drift,
                                         const CostFunctionalSpec& cost,
                                         std::span<const double> weights,
                                         std::vector<double>& cost_buffer) {
  const std::size_t n_paths = batch.count();
  cost_buffer.resize(n_paths);
  static thread_local std::vector<double> scratch;
  for (std::size_t j = 0; j < n_paths; ++j) {
    const auto z = batch.path(j, scratch);
    cost_buffer[j] = detail::regulated_cost_kernel(z, drift, weights, cost);
  }
  return pairwise_sum(cost_buffer) / static_cast<double>(n_paths);
}

/// Sample mean and standard error of J_N(F) = (1/N) sum_j cost(Gamma(Z_j+F)).
inline MeanAndError saa_objective(const PathBatch& batch, const DiscretePath& drift,
                                  const CostFunctionalSpec& cost, double tie_tol = -1.0) {
  const std::vector<double> costs = per_path_costs(batch, drift, cost, tie_tol);
  return mean_and_std_error(costs);
}

inline MeanAndError saa_objective(const PathBatch& batch, const DriftFunction& drift,
                                  const CostFunctionalSpec& cost, double tie_tol = -1.0) {
  return saa_objective(batch, evaluate_drift(drift, batch.grid()), cost, tie_tol);
}

/// a1*T*max|g'| + a2*max|G'| over [lo, hi], derivative maxima taken at the
/// endpoints (monotone derivatives of convex costs attain them there).
inline double cost_state_lipschitz(const CostFunctionalSpec& cost, double lo, double hi,
                                   double T) {
  cost.require_derivatives();
  double dg = 0.0, dG = 0.0;
  if (cost.running_weight_a1 != 0.0)
    dg = std::max(std::abs(cost.running_derivative(lo)),
                  std::abs(cost.running_derivative(hi)));
  if (cost.terminal_weight_a2 != 0.0)
    dG = std::max(std::abs(cost.terminal_derivative(lo)),
                  std::abs(cost.terminal_derivative(hi)));
  return std::abs(cost.running_weight_a1) * T * dg + std::abs(cost.terminal_weight_a2) * dG;
}

/// Per-path Lipschitz constants of F -> cost(Gamma(Z_j + F)) in the sup norm.
/// States reachable from path j stay within its zero-drift regulated envelope
/// widened by twice the feasible drift sup bound (the regulator is
/// 2-Lipschitz); the envelope is inflated 10% and the constant carries the
/// same factor 2.
inline std::vector<double> batch_path_lipschitz(const PathBatch& batch,
                                                const CostFunctionalSpec& cost,
                                                double drift_sup_bound,
                                                double tie_tol = -1.0) {
  const std::size_t n_paths = batch.count();
  const double T = batch.grid().horizon();
  std::vector<double> out(n_paths);
  parallel_for(n_paths, [&](std::size_t j) {
    std::vector<double> scratch;
    const auto z = batch.path(j, scratch);
    DiscretePath y;
    y.grid = batch.grid();
    y.values.assign(z.begin(), z.end());
    const RegulatedOutput reg = skorokhod_regulate(y, tie_tol);
    double hi = 0.0;
    for (double v : reg.regulated.values) hi = std::max(hi, v);
    hi = 1.1 * (hi + 2.0 * drift_sup_bound);
    out[j] = 2.0 * cost_state_lipschitz(cost, 0.0, hi, T);
  });
  return out;
}

}  // namespace driftopt
