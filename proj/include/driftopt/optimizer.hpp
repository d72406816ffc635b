#pragma once

// Mirror descent over coefficient space with the Euclidean mirror map
// psi(w) = ||w||^2 / 2 (rho = 1): the mirror step is G = F - eta * grad and
// the Bregman step is the Euclidean projection onto the feasible set. The
// step size is fixed per run:
//   eta = eta0 * (R / Kbar) * sqrt(2 rho / k),
//   R^2 = sup_{w feasible} psi(w) - psi(F_0),
//   Kbar = a bound on the dual norm of the sample-average gradient.
// The returned solution is the average of iterates 1..k.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "driftopt/costs.hpp"
#include "driftopt/sensitivity.hpp"
#include "driftopt/subspace.hpp"

namespace driftopt {

enum class MirrorMap { Euclidean };
enum class KbarMode { FromCostBounds, FromGradientNorms };

struct MirrorDescentConfig {
  std::size_t num_steps_k = 100;
  double eta0 = 0.5;  // in (0, 1)
  MirrorMap mirror_map = MirrorMap::Euclidean;
  double strong_convexity_rho = 1.0;
  KbarMode kbar_mode = KbarMode::FromCostBounds;
  double tie_tol = -1.0;
  bool record_iterates = true;

  void validate() const {
    if (num_steps_k < 1)
      throw std::invalid_argument("MirrorDescentConfig: need at least one step");
    if (!(eta0 > 0.0) || !(eta0 < 1.0))
      throw std::invalid_argument("MirrorDescentConfig: eta0 must lie in (0,1)");
    if (!(strong_convexity_rho > 0.0))
      throw std::invalid_argument("MirrorDescentConfig: rho must be positive");
  }
};

struct IterationRecord {
  std::size_t iteration;
  std::vector<double> iterate;  // point the gradient was evaluated at
  double objective;
  double gradient_norm;
  double step_size;
};

struct OptimizerTrace {
  std::vector<IterationRecord> records;
  std::vector<double> averaged_coefficients;
  DriftFunction averaged_solution;
  double averaged_objective = std::numeric_limits<double>::quiet_NaN();
  double averaged_objective_std_error = std::numeric_limits<double>::quiet_NaN();
  double step_size = 0.0;
  double radius_R = 0.0;
  double kbar = 0.0;
  double wall_seconds = 0.0;  // in-memory only; kept out of persisted outputs
};

/// R = sqrt(sup psi - psi(F0)) for psi = ||.||^2/2 and start F0 = 0.
inline double mirror_radius(const FeasibleSetSpec& feas, std::size_t n) {
  if (feas.kind == FeasibleKind::L2Ball) return feas.radius / std::sqrt(2.0);
  feas.check_dimension(n);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    worst += std::max(feas.lower[i] * feas.lower[i], feas.upper[i] * feas.upper[i]);
  return std::sqrt(0.5 * worst);
}

/// Generic loop. Problem supplies
///   double value_and_gradient(const std::vector<double>& a, std::vector<double>& grad)
/// and, for KbarMode::FromCostBounds, double kbar_from_cost_bounds().
template <typename Problem>
OptimizerTrace mirror_descent_loop(Problem&& problem, std::size_t n,
                                   const FeasibleSetSpec& feas,
                                   const MirrorDescentConfig& cfg) {
  cfg.validate();
  feas.check_dimension(n);
  std::vector<double> start(n, 0.0);
  if (!feas.contains(start))
    throw std::invalid_argument("mirror_descent: zero start is infeasible");

  OptimizerTrace trace;
  trace.radius_R = mirror_radius(feas, n);

  std::vector<double> grad(n, 0.0);
  if (cfg.kbar_mode == KbarMode::FromCostBounds) {
    if constexpr (requires { problem.kbar_from_cost_bounds(); }) {
      trace.kbar = problem.kbar_from_cost_bounds();
    } else {
      throw std::invalid_argument(
          "mirror_descent: cost-bound Kbar unavailable for this problem");
    }
  } else {
    // warm-up pass: gradient at the start, inflated 2x
    problem.value_and_gradient(start, grad);
    double norm = 0.0;
    for (double g : grad) norm += g * g;
    trace.kbar = 2.0 * std::sqrt(norm);
  }

  const double k = static_cast<double>(cfg.num_steps_k);
  trace.step_size =
      trace.kbar == 0.0
          ? 0.0
          : cfg.eta0 * (trace.radius_R / trace.kbar) *
                std::sqrt(2.0 * cfg.strong_convexity_rho / k);

  std::vector<double> current = start;
  std::vector<double> average(n, 0.0);
  for (std::size_t j = 0; j < cfg.num_steps_k; ++j) {
    double objective;
    try {
      objective = problem.value_and_gradient(current, grad);
    } catch (const NumericError& e) {
      throw NumericError("mirror_descent: aborted at iteration " + std::to_string(j) +
                         ": " + e.what());
    }
    double gnorm = 0.0;
    for (double g : grad) gnorm += g * g;
    gnorm = std::sqrt(gnorm);
    if (!std::isfinite(gnorm))
      throw NumericError("mirror_descent: non-finite gradient at iteration " +
                         std::to_string(j));
    if (cfg.record_iterates)
      trace.records.push_back({j, current, objective, gnorm, trace.step_size});

    std::vector<double> next(n);
    for (std::size_t i = 0; i < n; ++i) next[i] = current[i] - trace.step_size * grad[i];
    current = project_feasible(std::move(next), feas);
    for (std::size_t i = 0; i < n; ++i) average[i] += current[i];
  }
  for (double& a : average) a /= k;
  trace.averaged_coefficients = std::move(average);
  return trace;
}

namespace detail {

/// SAA objective/gradient pair sharing one regulation sweep per path.
struct SaaDriftProblem {
  const PathBatch& batch;
  const CostFunctionalSpec& cost;
  const FeasibleSetSpec& feas;
  BasisMatrix basis;
  double tie_tol;

  double value_and_gradient(const std::vector<double>& a, std::vector<double>& grad) {
    const std::size_t m = batch.grid().num_points();
    const std::size_t n_paths = batch.count();
    const std::size_t n = basis.cols;

    DiscretePath drift;
    drift.grid = batch.grid();
    drift.values.assign(m, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (a[j] == 0.0) continue;
      const auto col = basis.col(j);
      for (std::size_t i = 0; i < m; ++i) drift.values[i] += a[j] * col[i];
    }

    std::vector<double> per_path_cost(n_paths);
    std::vector<double> per_path_grad(n_paths * n);
    parallel_for(n_paths, [&](std::size_t p) {
      std::vector<double> scratch;
      const auto z = batch.path(p, scratch);
      DiscretePath y;
      y.grid = batch.grid();
      y.values.resize(m);
      for (std::size_t i = 0; i < m; ++i) y.values[i] = z[i] + drift.values[i];
      const RegulatedOutput reg = skorokhod_regulate(y, tie_tol);
      per_path_cost[p] = pathwise_cost(reg.regulated, cost);
      const std::vector<double> dc = direction_costs(reg, basis, cost);
      for (std::size_t d = 0; d < n; ++d) {
        if (!std::isfinite(dc[d]))
          throw NumericError("non-finite pathwise derivative (path " +
                             std::to_string(p) + ")");
        per_path_grad[p * n + d] = dc[d];
      }
    });

    grad.assign(n, 0.0);
    std::vector<double> column(n_paths);
    for (std::size_t d = 0; d < n; ++d) {
      for (std::size_t p = 0; p < n_paths; ++p) column[p] = per_path_grad[p * n + d];
      grad[d] = pairwise_sum(column) / static_cast<double>(n_paths);
    }
    return pairwise_sum(per_path_cost) / static_cast<double>(n_paths);
  }

  /// Kbar in coefficient space: mean per-path functional Lipschitz constant
  /// times the Euclidean norm of the basis sup-norms (|D_{P_j}| <= K ||P_j||).
  double kbar_from_cost_bounds() const {
    const double bound = feasible_drift_sup_bound(feas, basis);
    const std::vector<double> kz = batch_path_lipschitz(batch, cost, bound, tie_tol);
    const double kbar_fn = pairwise_sum(kz) / static_cast<double>(kz.size());
    double basis_norm = 0.0;
    for (double s : column_sup_norms(basis)) basis_norm += s * s;
    return kbar_fn * std::sqrt(basis_norm);
  }
};

}  // namespace detail

/// Solves the sampled drift-optimization problem on a fixed batch.
inline OptimizerTrace mirror_descent(const PathBatch& batch,
                                     const CostFunctionalSpec& cost,
                                     const BasisSpec& basis, const FeasibleSetSpec& feas,
                                     const MirrorDescentConfig& cfg) {
  if (batch.count() == 0) throw std::invalid_argument("mirror_descent: empty path batch");
  basis.validate();
  const auto t0 = std::chrono::steady_clock::now();

  detail::SaaDriftProblem problem{batch, cost, feas,
                                  evaluate_basis(basis, batch.grid()), cfg.tie_tol};
  OptimizerTrace trace = mirror_descent_loop(problem, basis.dimension_n, feas, cfg);

  trace.averaged_solution = DriftFunction{basis, trace.averaged_coefficients};
  const MeanAndError avg =
      saa_objective(batch, trace.averaged_solution, cost, cfg.tie_tol);
  trace.averaged_objective = avg.mean;
  trace.averaged_objective_std_error = avg.std_error;
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return trace;
}

inline void write_trace_csv(const OptimizerTrace& trace, std::ostream& os) {
  os << "iteration,objective,gradient_norm,step_size\n";
  char buf[128];
  for (const auto& r : trace.records) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", r.iteration, r.objective,
                  r.gradient_norm, r.step_size);
    os << buf;
  }
}

}  // namespace driftopt
