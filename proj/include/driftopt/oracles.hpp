#pragma once

// Independent oracles for tests and studies: finite-difference directional
// derivatives, the O(M^2) definitional regulator, exhaustive coefficient-grid
// minimization at n <= 2, and the statistical studies (unbiasedness,
// equiconvergence, per-parameter error-rate decomposition).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftopt/costs.hpp"
#include "driftopt/grid.hpp"
#include "driftopt/optimizer.hpp"
#include "driftopt/parallel.hpp"
#include "driftopt/paths.hpp"
#include "driftopt/regulator.hpp"
#include "driftopt/sensitivity.hpp"
#include "driftopt/stats.hpp"
#include "driftopt/subspace.hpp"

namespace driftopt::oracles {

enum class FdMode { Forward, Central };

/// Finite-difference derivative path of the regulator along u.
inline DiscretePath fd_gamma(const DiscretePath& y, const DirectionPath& u, double eps,
                             FdMode mode) {
  if (!(eps > 0)) throw std::invalid_argument("fd_gamma: eps must be positive");
  require_same_grid(y, u, "fd_gamma");
  const std::size_t m = y.values.size();
  DiscretePath plus = y, out;
  out.grid = y.grid;
  out.values.resize(m);
  for (std::size_t i = 0; i < m; ++i) plus.values[i] += eps * u.values[i];
  const auto gp = skorokhod_regulate(plus).regulated.values;
  if (mode == FdMode::Forward) {
    const auto g0 = skorokhod_regulate(y).regulated.values;
    for (std::size_t i = 0; i < m; ++i) out.values[i] = (gp[i] - g0[i]) / eps;
  } else {
    DiscretePath minus = y;
    for (std::size_t i = 0; i < m; ++i) minus.values[i] -= eps * u.values[i];
    const auto gm = skorokhod_regulate(minus).regulated.values;
    for (std::size_t i = 0; i < m; ++i) out.values[i] = (gp[i] - gm[i]) / (2.0 * eps);
  }
  return out;
}

/// Finite-difference derivative of the composed pathwise cost along u.
inline double fd_pathwise_cost(const DiscretePath& y, const DirectionPath& u,
                               const CostFunctionalSpec& cost, double eps, FdMode mode) {
  if (!(eps > 0)) throw std::invalid_argument("fd_pathwise_cost: eps must be positive");
  require_same_grid(y, u, "fd_pathwise_cost");
  const std::size_t m = y.values.size();
  DiscretePath shifted = y;
  for (std::size_t i = 0; i < m; ++i) shifted.values[i] += eps * u.values[i];
  const double jp = pathwise_cost(skorokhod_regulate(shifted).regulated, cost);
  if (mode == FdMode::Forward) {
    const double j0 = pathwise_cost(skorokhod_regulate(y).regulated, cost);
    return (jp - j0) / eps;
  }
  for (std::size_t i = 0; i < m; ++i) shifted.values[i] = y.values[i] - eps * u.values[i];
  const double jm = pathwise_cost(skorokhod_regulate(shifted).regulated, cost);
  return (jp - jm) / (2.0 * eps);
}

/// Definitional double loop: L(t) = max(0, max_{s<=t} -y(s)). Ground truth
/// for the fast sweep.
inline RegulatedOutput brute_force_regulate(const DiscretePath& y, double tie_tol = -1.0) {
  const std::size_t m = y.values.size();
  if (m == 0 || m != y.grid.num_points())
    throw std::invalid_argument("brute_force_regulate: path/grid size mismatch");
  if (!y.all_finite())
    throw std::invalid_argument("brute_force_regulate: non-finite path value");
  RegulatedOutput out;
  out.tie_tol = tie_tol < 0 ? default_tie_tol(y) : tie_tol;
  out.input = y;
  out.running_min.resize(m);
  out.regulator.grid = y.grid;
  out.regulator.values.resize(m);
  out.regulated.grid = y.grid;
  out.regulated.values.resize(m);
  for (std::size_t t = 0; t < m; ++t) {
    double sup_neg = -std::numeric_limits<double>::infinity();
    double min_y = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s <= t; ++s) {
      sup_neg = std::max(sup_neg, -y.values[s]);
      min_y = std::min(min_y, y.values[s]);
    }
    out.running_min[t] = min_y;
    out.regulator.values[t] = std::max(0.0, sup_neg);
    out.regulated.values[t] = y.values[t] + out.regulator.values[t];
  }
  return out;
}

struct GridSearchResult {
  std::vector<double> coefficients;
  double objective = 0.0;
};

/// Exhaustive minimization of the sample-average objective over a uniform
/// coefficient grid; only for n <= 2. Infeasible ball candidates are replaced
/// by their radial projections so the ball boundary is covered.
inline GridSearchResult grid_search_optimum(const PathBatch& batch,
                                            const CostFunctionalSpec& cost,
                                            const BasisSpec& basis,
                                            const FeasibleSetSpec& feas,
                                            std::size_t points_per_dim,
                                            double tie_tol = -1.0) {
  (void)tie_tol;
  basis.validate();
  const std::size_t n = basis.dimension_n;
  if (n > 2)
    throw std::invalid_argument("grid_search_optimum: exhaustive search only for n <= 2");
  if (points_per_dim < 2)
    throw std::invalid_argument("grid_search_optimum: need at least 2 points per dim");
  const BasisMatrix bm = evaluate_basis(basis, batch.grid());

  const auto axis = [&](std::size_t dim) {
    double lo, hi;
    if (feas.kind == FeasibleKind::L2Ball) {
      lo = -feas.radius;
      hi = feas.radius;
    } else {
      feas.check_dimension(n);
      lo = feas.lower[dim];
      hi = feas.upper[dim];
    }
    std::vector<double> pts(points_per_dim);
    for (std::size_t i = 0; i < points_per_dim; ++i)
      pts[i] = lo + (hi - lo) * static_cast<double>(i) /
                        static_cast<double>(points_per_dim - 1);
    return pts;
  };

  std::vector<std::vector<double>> candidates;
  if (n == 1) {
    for (double a : axis(0)) candidates.push_back({a});
  } else {
    const auto ax = axis(0), ay = axis(1);
    for (double a : ax)
      for (double b : ay) candidates.push_back(project_feasible({a, b}, feas));
  }

  const std::vector<double> weights = trapezoid_weights(batch.grid());
  const std::size_t m = batch.grid().num_points();
  std::vector<double> values(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t c) {
    static thread_local std::vector<double> drift, cost_buffer;
    drift.assign(m, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double a = candidates[c][j];
      if (a == 0.0) continue;
      const auto col = bm.col(j);
      for (std::size_t i = 0; i < m; ++i) drift[i] += a * col[i];
    }
    values[c] = mean_regulated_cost_serial(batch, drift, cost, weights, cost_buffer);
  });

  std::size_t best = 0;
  for (std::size_t c = 1; c < values.size(); ++c)
    if (values[c] < values[best]) best = c;
  return {candidates[best], values[best]};
}

struct StudyPoint {
  double x = 0.0;
  double y = 0.0;
  double y_std_error = 0.0;
};

struct StudyReport {
  std::string study_name;
  std::vector<StudyPoint> points;
  double slope = std::numeric_limits<double>::quiet_NaN();
  double slope_ci_half_width = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double window_lo = -std::numeric_limits<double>::infinity();
  double window_hi = std::numeric_limits<double>::infinity();
  double z_score = std::numeric_limits<double>::quiet_NaN();
  bool passed = false;
  bool inconclusive = false;
  std::string note;
  std::uint64_t seed = 0;

  /// Log-log OLS over the points (>= 4 required), pass iff the slope lands in
  /// [lo, hi]. CI half-width is 2 slope standard errors.
  void fit_and_judge(double lo, double hi) {
    if (points.size() < 4)
      throw std::invalid_argument("StudyReport: slope fit needs >= 4 points");
    std::vector<double> xs, ys;
    for (const auto& p : points) {
      if (p.y > 0) {
        xs.push_back(p.x);
        ys.push_back(p.y);
      }
    }
    if (xs.size() < 4) {
      inconclusive = true;
      note += " insufficient positive measurements;";
      return;
    }
    const LineFit fit = fit_loglog(xs, ys);
    slope = fit.slope;
    intercept = fit.intercept;
    slope_ci_half_width = 2.0 * fit.slope_std_error;
    window_lo = lo;
    window_hi = hi;
    passed = slope >= lo && slope <= hi;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["study"] = study_name;
    j["seed"] = seed;
    auto pts = nlohmann::ordered_json::array();
    for (const auto& p : points)
      pts.push_back({{"x", p.x}, {"y", p.y}, {"y_std_error", p.y_std_error}});
    j["points"] = pts;
    if (std::isfinite(slope)) {
      j["slope"] = slope;
      j["slope_ci_half_width"] = slope_ci_half_width;
      j["window"] = {window_lo, window_hi};
    }
    if (std::isfinite(z_score)) j["z_score"] = z_score;
    j["passed"] = passed;
    j["inconclusive"] = inconclusive;
    if (!note.empty()) j["note"] = note;
    return j;
  }

  void write_points_csv(std::ostream& os) const {
    os << "x,y,y_std_error\n";
    for (const auto& p : points)
      os << p.x << ',' << p.y << ',' << p.y_std_error << '\n';
  }
};

// ---------------------------------------------------------------------------
// Unbiasedness: the mean pathwise derivative across independent batches is
// compared with a central finite difference of the pooled objective.
// ---------------------------------------------------------------------------

struct UnbiasednessConfig {
  std::size_t num_batches = 30;
  std::size_t batch_N = 1000;
  double sigma = 1.0;
  double initial_x = 0.0;
  PathScheme scheme = PathScheme::EulerIncrements;
  std::uint64_t seed = 2024;
  double fd_eps = 1e-5;
};

inline StudyReport unbiasedness_study(const UnbiasednessConfig& cfg,
                                      const DriftFunction& F, const DirectionPath& u,
                                      const CostFunctionalSpec& cost,
                                      const GridSpec& grid) {
  if (cfg.num_batches < 2)
    throw std::invalid_argument("unbiasedness_study: need >= 2 batches");
  const DiscretePath drift = evaluate_drift(F, grid);
  DiscretePath drift_plus = drift, drift_minus = drift;
  for (std::size_t i = 0; i < drift.values.size(); ++i) {
    drift_plus.values[i] += cfg.fd_eps * u.values[i];
    drift_minus.values[i] -= cfg.fd_eps * u.values[i];
  }
  BasisMatrix dir;
  dir.rows = u.values.size();
  dir.cols = 1;
  dir.data = u.values;

  std::vector<double> batch_means(cfg.num_batches);
  std::vector<double> plus_means(cfg.num_batches), minus_means(cfg.num_batches);
  for (std::size_t b = 0; b < cfg.num_batches; ++b) {
    PathBatchSpec ps;
    ps.count_N = cfg.batch_N;
    ps.scheme = cfg.scheme;
    ps.sigma = cfg.sigma;
    ps.initial_x = cfg.initial_x;
    ps.seed = stream_key(cfg.seed, b);
    const PathBatch batch = PathBatch::stored(ps, grid);
    batch_means[b] = saa_gradient(batch, drift, cost, dir).coefficients[0];
    plus_means[b] = saa_objective(batch, drift_plus, cost).mean;
    minus_means[b] = saa_objective(batch, drift_minus, cost).mean;
  }

  const MeanAndError grand = mean_and_std_error(batch_means);
  const double fd = (pairwise_sum(plus_means) - pairwise_sum(minus_means)) /
                    (2.0 * cfg.fd_eps * static_cast<double>(cfg.num_batches));

  StudyReport report;
  report.study_name = "unbiasedness";
  report.seed = cfg.seed;
  for (std::size_t b = 0; b < cfg.num_batches; ++b)
    report.points.push_back({static_cast<double>(b), batch_means[b], 0.0});
  report.z_score =
      grand.std_error == 0.0 ? 0.0 : (grand.mean - fd) / grand.std_error;
  report.passed = std::abs(report.z_score) <= 3.0;
  report.note = "estimator mean " + std::to_string(grand.mean) + ", fd " +
                std::to_string(fd);
  return report;
}

// ---------------------------------------------------------------------------
// Equiconvergence: sup over fixed drift probes of |J_N - J_ref| versus N,
// fresh batches per N, log-log slope expected near -1/2.
// ---------------------------------------------------------------------------

struct EquiconvergenceConfig {
  std::vector<std::size_t> N_values = {16, 32, 64, 128, 256, 512, 1024};
  std::size_t probe_count = 20;
  std::size_t reference_multiple = 64;  // reference_N = multiple * max(N_values)
  std::size_t replications = 8;
  double sigma = 1.0;
  double initial_x = 0.0;
  PathScheme scheme = PathScheme::EulerIncrements;
  std::uint64_t seed = 7;
  BasisSpec probe_basis{BasisKind::IntegratedLegendre, 4, 1.0};
  FeasibleSetSpec probe_feas = FeasibleSetSpec::ball(1.0);
  double window_lo = -0.65, window_hi = -0.35;
};

inline StudyReport equiconvergence_study(const EquiconvergenceConfig& cfg,
                                         const CostFunctionalSpec& cost,
                                         const GridSpec& grid) {
  if (cfg.N_values.size() < 4)
    throw std::invalid_argument("equiconvergence_study: need >= 4 sample sizes");
  const std::size_t max_n =
      *std::max_element(cfg.N_values.begin(), cfg.N_values.end());
  const std::size_t reference_N = cfg.reference_multiple * max_n;

  // fixed probe drifts
  CounterRng probe_rng(cfg.seed, 0xFEA5);
  const BasisMatrix bm = evaluate_basis(cfg.probe_basis, grid);
  std::vector<DiscretePath> probes;
  for (std::size_t p = 0; p < cfg.probe_count; ++p) {
    DriftFunction f{cfg.probe_basis,
                    random_feasible(cfg.probe_feas, cfg.probe_basis.dimension_n,
                                    probe_rng)};
    probes.push_back(evaluate_drift(f, bm, grid));
  }

  const auto batch_spec = [&](std::uint64_t stream) {
    PathBatchSpec ps;
    ps.count_N = 1;  // overwritten
    ps.scheme = cfg.scheme;
    ps.sigma = cfg.sigma;
    ps.initial_x = cfg.initial_x;
    ps.seed = stream_key(cfg.seed, stream);
    return ps;
  };

  PathBatchSpec ref_spec = batch_spec(0);
  ref_spec.count_N = reference_N;
  const PathBatch ref_batch = PathBatch::stored(ref_spec, grid);
  std::vector<double> ref_values(probes.size());
  for (std::size_t p = 0; p < probes.size(); ++p)
    ref_values[p] = saa_objective(ref_batch, probes[p], cost).mean;

  StudyReport report;
  report.study_name = "equiconvergence";
  report.seed = cfg.seed;
  std::uint64_t stream = 1;
  for (std::size_t N : cfg.N_values) {
    std::vector<double> sup_gaps(cfg.replications);
    for (std::size_t r = 0; r < cfg.replications; ++r) {
      PathBatchSpec ps = batch_spec(stream++);
      ps.count_N = N;
      const PathBatch batch = PathBatch::stored(ps, grid);
      double sup = 0.0;
      for (std::size_t p = 0; p < probes.size(); ++p)
        sup = std::max(sup,
                       std::abs(saa_objective(batch, probes[p], cost).mean -
                                ref_values[p]));
      sup_gaps[r] = sup;
    }
    const MeanAndError me = mean_and_std_error(sup_gaps);
    report.points.push_back({static_cast<double>(N), me.mean, me.std_error});
  }
  report.fit_and_judge(cfg.window_lo, cfg.window_hi);
  return report;
}

// ---------------------------------------------------------------------------
// Rate decomposition: optimality-gap decay against one of (k, N, h, n) with
// the non-swept parameters set generously so the swept error term dominates.
// Per-parameter designs:
//  - k: frozen batch, mirror-descent averaged value vs the exhaustive grid
//       optimum on the same batch; slope at most -0.4.
//  - N: exact (grid) SAA minimizer per fresh batch; gap is the achieved SAA
//       value against a high-N reference optimum, decaying like N^(-1/2).
//  - h: achieved value per step size against an h_ref reference; the gap is
//       the discretization bias of the regulated functional.
//  - n: nested hat subspaces; the reference solution is interpolated onto
//       each subspace and re-evaluated on the frozen batch. The window is
//       centered on the approximation rate measured on the reference drift.
// ---------------------------------------------------------------------------

enum class SweepParameter { OptimizationSteps, SampleCount, TimeStep, BasisDimension };

struct RateStudyConfig {
  SweepParameter sweep = SweepParameter::SampleCount;
  std::vector<double> sweep_values;
  std::size_t replications = 4;
  std::uint64_t seed = 11;
  double sigma = 1.0, T = 1.0, initial_x = 0.0;
  double eta0 = 0.9;
  // generous non-swept settings
  std::size_t base_k = 512;
  std::size_t base_N = 2000;
  std::size_t base_n = 1;
  double base_h = 1.0 / 64.0;
  // references (0 / <=0 means derive from the base values)
  std::size_t reference_N = 0;
  double reference_h = -1.0;
  double window_lo = -0.65, window_hi = -0.35;
};

/// Canonical settings per swept parameter.
inline RateStudyConfig default_rate_study(SweepParameter sweep, std::uint64_t seed = 11) {
  RateStudyConfig cfg;
  cfg.sweep = sweep;
  cfg.seed = seed;
  switch (sweep) {
    case SweepParameter::OptimizationSteps:
      cfg.sweep_values = {16, 32, 64, 128, 256, 512, 1024, 2048};
      cfg.base_N = 2000;
      cfg.base_h = 1.0 / 64.0;
      cfg.replications = 1;
      cfg.window_lo = -10.0;
      cfg.window_hi = -0.4;
      break;
    case SweepParameter::SampleCount:
      cfg.sweep_values = {16, 32, 64, 128, 256, 512, 1024};
      cfg.base_h = 1.0 / 64.0;
      cfg.replications = 16;
      cfg.window_lo = -0.65;
      cfg.window_hi = -0.35;
      break;
    case SweepParameter::TimeStep:
      cfg.sweep_values = {0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125};
      cfg.base_N = 16384;
      cfg.reference_N = 131072;
      cfg.reference_h = 0.0009765625;  // 2^-10
      cfg.replications = 4;
      cfg.window_lo = 0.5;
      cfg.window_hi = 1.5;
      break;
    case SweepParameter::BasisDimension:
      cfg.sweep_values = {4, 8, 16, 32, 64};
      cfg.base_N = 16;
      cfg.base_h = 1.0 / 256.0;
      cfg.initial_x = 6.0;  // keeps the regulator inactive for this instance
      cfg.replications = 8;
      // window recentred at runtime on the measured approximation rate
      cfg.window_lo = 0.0;
      cfg.window_hi = 0.0;
      break;
  }
  return cfg;
}

namespace detail {

inline PathBatchSpec rate_batch_spec(const RateStudyConfig& cfg, std::size_t count,
                                     PathScheme scheme, std::uint64_t stream) {
  PathBatchSpec ps;
  ps.count_N = count;
  ps.scheme = scheme;
  ps.sigma = cfg.sigma;
  ps.initial_x = cfg.initial_x;
  ps.seed = stream_key(cfg.seed, stream);
  return ps;
}

/// Flags the report inconclusive if the gap curve is not monotone in the
/// expected direction beyond noise.
inline void check_dominance(StudyReport& r, bool expect_decreasing) {
  for (std::size_t i = 0; i + 1 < r.points.size(); ++i) {
    const auto& a = r.points[i];
    const auto& b = r.points[i + 1];
    const double slack = 2.0 * (a.y_std_error + b.y_std_error) + 0.1 * std::abs(a.y);
    const bool violated = expect_decreasing ? b.y > a.y + slack : b.y < a.y - slack;
    if (violated) {
      r.inconclusive = true;
      r.note += " dominance violated near x=" + std::to_string(b.x) + ";";
      return;
    }
  }
}

inline StudyReport rate_sweep_steps(const RateStudyConfig& cfg) {
  const GridSpec grid = make_grid(cfg.T, cfg.base_h);
  const CostFunctionalSpec cost = cost_linear(1.0, 1.0);
  const BasisSpec basis{BasisKind::IntegratedLegendre, 1, cfg.T};
  const FeasibleSetSpec feas = FeasibleSetSpec::ball(1.0);
  const PathBatch batch =
      PathBatch::stored(rate_batch_spec(cfg, cfg.base_N, PathScheme::EulerIncrements, 100),
                        grid);
  const GridSearchResult oracle =
      grid_search_optimum(batch, cost, basis, feas, 2001);

  StudyReport report;
  report.study_name = "rate_optimization_steps";
  report.seed = cfg.seed;
  for (double kv : cfg.sweep_values) {
    MirrorDescentConfig mdc;
    mdc.num_steps_k = static_cast<std::size_t>(kv);
    mdc.eta0 = cfg.eta0;
    mdc.record_iterates = false;
    const OptimizerTrace trace = mirror_descent(batch, cost, basis, feas, mdc);
    report.points.push_back({kv, trace.averaged_objective - oracle.objective, 0.0});
  }
  check_dominance(report, /*expect_decreasing=*/true);
  report.fit_and_judge(cfg.window_lo, cfg.window_hi);
  return report;
}

inline StudyReport rate_sweep_samples(const RateStudyConfig& cfg) {
  const GridSpec grid = make_grid(cfg.T, cfg.base_h);
  const CostFunctionalSpec cost = cost_linear(1.0, 1.0);
  const BasisSpec basis{BasisKind::IntegratedLegendre, 1, cfg.T};
  const FeasibleSetSpec feas = FeasibleSetSpec::ball(1.0);

  double max_n = 0;
  for (double v : cfg.sweep_values) max_n = std::max(max_n, v);
  const std::size_t ref_N = cfg.reference_N > 0
                                ? cfg.reference_N
                                : 64 * static_cast<std::size_t>(max_n);
  const PathBatch ref_batch =
      PathBatch::stored(rate_batch_spec(cfg, ref_N, PathScheme::EulerIncrements, 200),
                        grid);
  const double ref_value =
      grid_search_optimum(ref_batch, cost, basis, feas, 129).objective;

  StudyReport report;
  report.study_name = "rate_sample_count";
  report.seed = cfg.seed;
  std::uint64_t stream = 300;
  for (double Nv : cfg.sweep_values) {
    std::vector<double> gaps(cfg.replications);
    for (std::size_t r = 0; r < cfg.replications; ++r) {
      const PathBatch batch = PathBatch::stored(
          rate_batch_spec(cfg, static_cast<std::size_t>(Nv),
                          PathScheme::EulerIncrements, stream++),
          grid);
      gaps[r] = std::abs(grid_search_optimum(batch, cost, basis, feas, 129).objective -
                         ref_value);
    }
    const MeanAndError me = mean_and_std_error(gaps);
    report.points.push_back({Nv, me.mean, me.std_error});
  }
  check_dominance(report, /*expect_decreasing=*/true);
  report.fit_and_judge(cfg.window_lo, cfg.window_hi);
  return report;
}

inline StudyReport rate_sweep_timestep(const RateStudyConfig& cfg) {
  const CostFunctionalSpec cost = cost_linear(1.0, 1.0);
  const BasisSpec basis{BasisKind::IntegratedLegendre, 1, cfg.T};
  const FeasibleSetSpec feas = FeasibleSetSpec::ball(1.0);
  const double h_ref = cfg.reference_h > 0 ? cfg.reference_h : 0.0009765625;
  const std::size_t ref_N = cfg.reference_N > 0 ? cfg.reference_N : 8 * cfg.base_N;

  const GridSpec ref_grid = make_grid(cfg.T, h_ref);
  const PathBatch ref_batch = PathBatch::stored(
      rate_batch_spec(cfg, ref_N, PathScheme::EulerIncrements, 400), ref_grid);
  const double ref_value =
      grid_search_optimum(ref_batch, cost, basis, feas, 33).objective;

  StudyReport report;
  report.study_name = "rate_time_step";
  report.seed = cfg.seed;
  std::uint64_t stream = 500;
  for (double h : cfg.sweep_values) {
    const GridSpec grid = make_grid(cfg.T, h);
    std::vector<double> achieved(cfg.replications);
    for (std::size_t r = 0; r < cfg.replications; ++r) {
      const PathBatch batch = PathBatch::stored(
          rate_batch_spec(cfg, cfg.base_N, PathScheme::EulerIncrements, stream++), grid);
      achieved[r] = grid_search_optimum(batch, cost, basis, feas, 33).objective;
    }
    const MeanAndError me = mean_and_std_error(achieved);
    report.points.push_back({h, std::abs(me.mean - ref_value), me.std_error});
  }
  // sweep runs from coarse to fine, so the bias gap shrinks along the list
  check_dominance(report, /*expect_decreasing=*/true);
  report.fit_and_judge(cfg.window_lo, cfg.window_hi);
  return report;
}

inline StudyReport rate_sweep_basis_dimension(const RateStudyConfig& cfg) {
  // Instance with an exactly known reference optimum: paths start high enough
  // that the regulator never binds, and the running cost tracks the start
  // level, g(x) = (x - x0)^2. The objective is (1/N) sum_j Quad((B_j + F)^2)
  // in the centered noise, minimized over all drifts by F* = -mean(B), so
  //   J(Pi_n F*) - J(F*) = Quad((Pi_n F* - F*)^2)
  // isolates the approximation-error term: F* carries Brownian roughness and
  // its hat-interpolation residual sets the decay rate.
  const GridSpec grid = make_grid(cfg.T, cfg.base_h);
  const double level = cfg.initial_x;
  CostFunctionalSpec cost;
  cost.running_weight_a1 = 1.0;
  cost.running_fn = [level](double x) { return (x - level) * (x - level); };
  cost.running_derivative = [level](double x) { return 2.0 * (x - level); };
  cost.name = "level_tracking";
  const std::size_t m = grid.num_points();

  // hat knots must land on grid nodes so knot interpolation is exact
  for (double nv : cfg.sweep_values) {
    const auto n = static_cast<std::size_t>(nv);
    if ((m - 1) % n != 0)
      throw std::invalid_argument(
          "rate_decomposition_study: basis sweep requires dyadic hat sizes");
  }

  std::vector<BasisMatrix> sweep_bases;
  for (double nv : cfg.sweep_values)
    sweep_bases.push_back(evaluate_basis(
        {BasisKind::PiecewiseLinearHat, static_cast<std::size_t>(nv), cfg.T}, grid));

  std::vector<std::size_t> n_values;
  for (double nv : cfg.sweep_values) n_values.push_back(static_cast<std::size_t>(nv));

  StudyReport report;
  report.study_name = "rate_basis_dimension";
  report.seed = cfg.seed;
  std::vector<std::vector<double>> gaps(cfg.sweep_values.size());
  std::vector<double> mean_residual(cfg.sweep_values.size(), 0.0);
  for (std::size_t r = 0; r < cfg.replications; ++r) {
    const PathBatch batch = PathBatch::stored(
        rate_batch_spec(cfg, cfg.base_N, PathScheme::EulerIncrements, 600 + r), grid);
    DiscretePath ref_drift;  // F* = -(mean path - start level), rough, F*(0) = 0
    ref_drift.grid = grid;
    ref_drift.values.assign(m, 0.0);
    std::vector<double> scratch;
    for (std::size_t j = 0; j < batch.count(); ++j) {
      const auto z = batch.path(j, scratch);
      for (std::size_t i = 0; i < m; ++i) ref_drift.values[i] -= z[i] - level;
    }
    for (double& v : ref_drift.values) v /= static_cast<double>(batch.count());
    const auto curve =
        projection_error_curve(ref_drift, BasisKind::PiecewiseLinearHat, n_values);
    for (std::size_t s = 0; s < curve.size(); ++s)
      mean_residual[s] += curve[s].sup_residual / static_cast<double>(cfg.replications);
    const double ref_value = saa_objective(batch, ref_drift, cost).mean;

    for (std::size_t s = 0; s < cfg.sweep_values.size(); ++s) {
      const auto n = static_cast<std::size_t>(cfg.sweep_values[s]);
      DriftFunction proj{{BasisKind::PiecewiseLinearHat, n, cfg.T}, {}};
      proj.coefficients.resize(n);
      for (std::size_t j = 1; j <= n; ++j)
        proj.coefficients[j - 1] = ref_drift.values[j * (m - 1) / n];
      const DiscretePath proj_drift = evaluate_drift(proj, sweep_bases[s], grid);
      gaps[s].push_back(saa_objective(batch, proj_drift, cost).mean - ref_value);
    }
  }
  for (std::size_t s = 0; s < cfg.sweep_values.size(); ++s) {
    const MeanAndError me = mean_and_std_error(gaps[s]);
    report.points.push_back({cfg.sweep_values[s], me.mean, me.std_error});
  }

  // approximation rate measured on the reference drifts themselves
  const double alpha_hat = -fit_loglog(cfg.sweep_values, mean_residual).slope;
  report.note = "measured alpha " + std::to_string(alpha_hat) + ";";

  check_dominance(report, /*expect_decreasing=*/true);
  report.fit_and_judge(-alpha_hat - 0.6, -alpha_hat + 0.6);
  return report;
}

}  // namespace detail

inline StudyReport rate_decomposition_study(const RateStudyConfig& cfg) {
  if (cfg.sweep_values.size() < 4)
    throw std::invalid_argument("rate_decomposition_study: need >= 4 sweep values");
  switch (cfg.sweep) {
    case SweepParameter::OptimizationSteps:
      return detail::rate_sweep_steps(cfg);
    case SweepParameter::SampleCount:
      return detail::rate_sweep_samples(cfg);
    case SweepParameter::TimeStep:
      return detail::rate_sweep_timestep(cfg);
    case SweepParameter::BasisDimension:
      return detail::rate_sweep_basis_dimension(cfg);
  }
  throw std::invalid_argument("rate_decomposition_study: unknown sweep");
}

}  // namespace driftopt::oracles
