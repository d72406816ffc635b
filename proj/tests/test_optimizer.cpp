#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "driftopt/optimizer.hpp"
#include "driftopt/oracles.hpp"
#include "driftopt/stats.hpp"

using namespace driftopt;

namespace {

// deterministic quadratic surrogate ||a - a*||^2 with a known optimum
struct QuadraticSurrogate {
  std::vector<double> optimum;
  double value_and_gradient(const std::vector<double>& a, std::vector<double>& grad) {
    grad.resize(a.size());
    double v = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - optimum[i];
      v += d * d;
      grad[i] = 2.0 * d;
    }
    return v;
  }
};

}  // namespace

TEST_CASE("zero-gradient landscape never moves the iterates") {
  const GridSpec grid = make_grid(1.0, 0.25);
  PathBatchSpec ps;
  ps.count_N = 8;
  ps.seed = 4;
  const auto batch = PathBatch::stored(ps, grid);
  CostFunctionalSpec cost;  // g == 0, G == 1
  cost.running_weight_a1 = 0.0;
  cost.terminal_weight_a2 = 1.0;
  cost.terminal_fn = [](double) { return 1.0; };
  cost.terminal_derivative = [](double) { return 0.0; };
  cost.name = "constant";
  const BasisSpec basis{BasisKind::IntegratedLegendre, 2, 1.0};
  MirrorDescentConfig cfg;
  cfg.num_steps_k = 16;
  const auto trace =
      mirror_descent(batch, cost, basis, FeasibleSetSpec::ball(1.0), cfg);
  for (double c : trace.averaged_coefficients) CHECK(c == 0.0);
  for (const auto& rec : trace.records)
    for (double c : rec.iterate) CHECK(c == 0.0);
  CHECK(trace.averaged_objective == Catch::Approx(1.0));
}

TEST_CASE("averaged gap on the quadratic surrogate decays with the right slope") {
  const FeasibleSetSpec feas = FeasibleSetSpec::ball(2.0);
  std::vector<double> ks, gaps;
  for (int p = 4; p <= 12; ++p) {
    const std::size_t k = std::size_t{1} << p;
    QuadraticSurrogate problem{{0.6, -0.4, 0.2}};
    MirrorDescentConfig cfg;
    cfg.num_steps_k = k;
    cfg.eta0 = 0.5;
    cfg.kbar_mode = KbarMode::FromGradientNorms;
    cfg.record_iterates = false;
    const auto trace = mirror_descent_loop(problem, 3, feas, cfg);
    std::vector<double> g;
    const double gap = problem.value_and_gradient(trace.averaged_coefficients, g);
    ks.push_back(static_cast<double>(k));
    gaps.push_back(gap);
  }
  const double slope = fit_loglog(ks, gaps).slope;
  CHECK(slope <= -0.4);
  CHECK(slope >= -1.2);
}

TEST_CASE("averaged objective is monotone in k on the surrogate") {
  const FeasibleSetSpec feas = FeasibleSetSpec::ball(2.0);
  QuadraticSurrogate problem{{0.5, 0.5}};
  MirrorDescentConfig cfg;
  cfg.num_steps_k = 64;
  cfg.eta0 = 0.5;
  cfg.kbar_mode = KbarMode::FromGradientNorms;
  const auto trace = mirror_descent_loop(problem, 2, feas, cfg);
  // replay the running averages of the post-step iterates
  std::vector<double> avg(2, 0.0), prev;
  double prev_value = std::numeric_limits<double>::infinity();
  std::vector<double> g;
  std::vector<double> current(2, 0.0);
  for (std::size_t j = 0; j < 64; ++j) {
    problem.value_and_gradient(current, g);
    for (std::size_t i = 0; i < 2; ++i) current[i] -= trace.step_size * g[i];
    current = project_feasible(current, feas);
    for (std::size_t i = 0; i < 2; ++i)
      avg[i] = (avg[i] * static_cast<double>(j) + current[i]) / static_cast<double>(j + 1);
    std::vector<double> g2;
    const double value = problem.value_and_gradient(avg, g2);
    CHECK(value <= prev_value + 1e-12);
    prev_value = value;
  }
}

TEST_CASE("step size follows the configured rule exactly") {
  const GridSpec grid = make_grid(1.0, 1.0 / 16);
  PathBatchSpec ps;
  ps.count_N = 64;
  ps.seed = 10;
  const auto batch = PathBatch::stored(ps, grid);
  const BasisSpec basis{BasisKind::IntegratedLegendre, 2, 1.0};
  const auto feas = FeasibleSetSpec::ball(1.5);
  MirrorDescentConfig cfg;
  cfg.num_steps_k = 32;
  cfg.eta0 = 0.7;
  const auto trace = mirror_descent(batch, cost_linear(), basis, feas, cfg);
  const double expected = cfg.eta0 * (trace.radius_R / trace.kbar) *
                          std::sqrt(2.0 * cfg.strong_convexity_rho /
                                    static_cast<double>(cfg.num_steps_k));
  CHECK(trace.step_size == expected);
  CHECK(trace.radius_R == feas.radius / std::sqrt(2.0));
}

TEST_CASE("iterates and averaged solution stay feasible") {
  const GridSpec grid = make_grid(1.0, 1.0 / 16);
  PathBatchSpec ps;
  ps.count_N = 128;
  ps.seed = 12;
  const auto batch = PathBatch::stored(ps, grid);
  const BasisSpec basis{BasisKind::IntegratedLegendre, 3, 1.0};
  for (const auto& feas :
       {FeasibleSetSpec::ball(0.4), FeasibleSetSpec::box({-0.2, -0.2, -0.2},
                                                         {0.1, 0.3, 0.2})}) {
    MirrorDescentConfig cfg;
    cfg.num_steps_k = 64;
    cfg.eta0 = 0.9;
    const auto trace = mirror_descent(batch, cost_linear(), basis, feas, cfg);
    for (const auto& rec : trace.records) CHECK(feas.contains(rec.iterate, 1e-12));
    CHECK(feas.contains(trace.averaged_coefficients, 1e-12));
  }
}

TEST_CASE("trace is identical across thread counts") {
  const GridSpec grid = make_grid(1.0, 1.0 / 32);
  PathBatchSpec ps;
  ps.count_N = 256;
  ps.seed = 21;
  const BasisSpec basis{BasisKind::IntegratedLegendre, 2, 1.0};
  const auto feas = FeasibleSetSpec::ball(1.0);
  MirrorDescentConfig cfg;
  cfg.num_steps_k = 24;

  std::vector<OptimizerTrace> traces;
  for (int threads : {1, 2, 8}) {
    set_num_threads(threads);
    const auto batch = PathBatch::stored(ps, grid);
    traces.push_back(mirror_descent(batch, cost_quadratic(), basis, feas, cfg));
  }
  set_num_threads(0);
  for (std::size_t v = 1; v < traces.size(); ++v) {
    CHECK(traces[v].averaged_objective == traces[0].averaged_objective);
    for (std::size_t j = 0; j < traces[0].records.size(); ++j) {
      CHECK(traces[v].records[j].objective == traces[0].records[j].objective);
      CHECK(traces[v].records[j].gradient_norm == traces[0].records[j].gradient_norm);
      CHECK(traces[v].records[j].iterate == traces[0].records[j].iterate);
    }
  }
}

TEST_CASE("one-dimensional drift run lands near the exhaustive optimum") {
  const GridSpec grid = make_grid(1.0, 1.0 / 16);
  PathBatchSpec ps;
  ps.count_N = 2000;
  ps.seed = 33;
  const auto batch = PathBatch::stored(ps, grid);
  const auto cost = cost_linear();
  const BasisSpec basis{BasisKind::IntegratedLegendre, 1, 1.0};
  const auto feas = FeasibleSetSpec::ball(1.0);

  const std::size_t points = 401;
  const auto oracle = oracles::grid_search_optimum(batch, cost, basis, feas, points);
  MirrorDescentConfig cfg;
  cfg.num_steps_k = 2048;
  cfg.eta0 = 0.95;
  cfg.kbar_mode = KbarMode::FromGradientNorms;
  cfg.record_iterates = false;
  const auto trace = mirror_descent(batch, cost, basis, feas, cfg);

  const auto bm = evaluate_basis(basis, grid);
  const double khat =
      mean_and_std_error(batch_path_lipschitz(batch, cost,
                                              feasible_drift_sup_bound(feas, bm)))
          .mean *
      column_sup_norms(bm)[0];
  const double spacing = 2.0 * feas.radius / static_cast<double>(points - 1);
  CHECK(trace.averaged_objective <= oracle.objective + 2.0 * spacing * khat);
}

TEST_CASE("infeasible zero start is rejected") {
  const GridSpec grid = make_grid(1.0, 0.5);
  PathBatchSpec ps;
  ps.count_N = 4;
  ps.seed = 2;
  const auto batch = PathBatch::stored(ps, grid);
  const BasisSpec basis{BasisKind::IntegratedLegendre, 2, 1.0};
  const auto feas = FeasibleSetSpec::box({0.5, 0.5}, {1.0, 1.0});
  MirrorDescentConfig cfg;
  CHECK_THROWS_AS(mirror_descent(batch, cost_linear(), basis, feas, cfg),
                  std::invalid_argument);
}

TEST_CASE("config validation") {
  MirrorDescentConfig cfg;
  cfg.eta0 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.eta0 = 0.5;
  cfg.num_steps_k = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("non-finite pathwise derivatives abort with a diagnostic") {
  const GridSpec grid = make_grid(1.0, 0.25);
  PathBatchSpec ps;
  ps.count_N = 4;
  ps.seed = 55;
  const auto batch = PathBatch::stored(ps, grid);
  CostFunctionalSpec bad;
  bad.terminal_weight_a2 = 1.0;
  bad.terminal_fn = [](double x) { return x; };
  bad.terminal_derivative = [](double) { return std::nan(""); };
  bad.name = "nan_derivative";
  const BasisSpec basis{BasisKind::IntegratedLegendre, 1, 1.0};
  MirrorDescentConfig cfg;
  cfg.num_steps_k = 4;
  cfg.kbar_mode = KbarMode::FromGradientNorms;
  try {
    mirror_descent(batch, bad, basis, FeasibleSetSpec::ball(1.0), cfg);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("iteration") != std::string::npos);
    CHECK(msg.find("path") != std::string::npos);
  }
}
