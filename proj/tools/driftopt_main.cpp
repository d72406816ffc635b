// driftopt: drift optimization of Skorokhod-regulated sample paths.
//
// Subcommands: optimize, allocate, study, evaluate, paths-export.
// Exit codes: 0 ok, 1 runtime failure, 2 configuration error.
// Structured outputs are deterministic for a fixed config and seed; wall
// times go to stdout only. DRIFTOPT_OUT overrides --out.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "driftopt/allocator.hpp"
#include "driftopt/costs.hpp"
#include "driftopt/optimizer.hpp"
#include "driftopt/oracles.hpp"
#include "driftopt/parallel.hpp"
#include "driftopt/paths.hpp"
#include "driftopt/subspace.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// config parsing with unknown-key rejection
// ---------------------------------------------------------------------------

int line_of_key(const std::string& raw, const std::string& key) {
  const auto pos = raw.find('"' + key + '"');
  if (pos == std::string::npos) return -1;
  return 1 + static_cast<int>(std::count(raw.begin(), raw.begin() + pos, '\n'));
}

void reject_unknown_keys(const ordered_json& obj, const std::string& path,
                         const std::set<std::string>& allowed, const std::string& raw) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      std::string msg = path + ": unknown key '" + it.key() + "'";
      const int line = line_of_key(raw, it.key());
      if (line > 0) msg += " (line " + std::to_string(line) + ")";
      throw ConfigError(msg);
    }
  }
}

template <typename T>
T get_or(const ordered_json& obj, const std::string& key, const T& fallback,
         const std::string& path) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

struct ExperimentConfig {
  // problem
  double horizon_T = 1.0, sigma = 1.0, initial_x = 0.0;
  std::string cost_preset = "linear";
  double a1 = 1.0, a2 = 1.0, target = 0.0;
  std::string basis_kind = "integrated_legendre";
  std::size_t basis_n = 4;
  std::string feasible_kind = "l2_ball";
  double radius = 1.0;
  std::vector<double> lower, upper;
  // solver
  std::size_t N = 1024;
  double h = 1.0 / 64.0;
  std::size_t k = 64;
  double eta0 = 0.5;
  std::string scheme = "euler";
  std::string kbar_mode = "cost_bounds";
  std::uint64_t seed = 1;
  double tie_tol = -1.0;
  std::size_t memory_cap_mb = 4096;
  // study
  std::vector<std::string> studies = {"unbiasedness"};
  std::size_t study_num_batches = 30, study_batch_N = 1000;
  std::vector<std::size_t> study_N_values = {16, 32, 64, 128, 256, 512, 1024};
  std::size_t study_probes = 20, study_reference_multiple = 64, study_replications = 8;
  std::size_t rate_replications = 0;  // 0: per-sweep default
  // output
  std::string out_dir = "out";
  bool emit_json = true, emit_csv = true;

  driftopt::GridSpec grid() const { return driftopt::make_grid(horizon_T, h); }

  driftopt::PathScheme path_scheme() const {
    if (scheme == "euler") return driftopt::PathScheme::EulerIncrements;
    if (scheme == "haar_wavelet_levy") return driftopt::PathScheme::HaarWaveletLevy;
    throw ConfigError("solver.scheme: expected 'euler' or 'haar_wavelet_levy'");
  }

  driftopt::CostFunctionalSpec cost() const {
    if (cost_preset == "linear") return driftopt::cost_linear(a1, a2);
    if (cost_preset == "quadratic") return driftopt::cost_quadratic(a1, a2);
    if (cost_preset == "terminal_tracking")
      return driftopt::cost_terminal_tracking(target, a2);
    throw ConfigError(
        "problem.cost.preset: expected 'linear', 'quadratic' or 'terminal_tracking'");
  }

  driftopt::BasisSpec basis() const {
    driftopt::BasisKind kind;
    if (basis_kind == "integrated_legendre")
      kind = driftopt::BasisKind::IntegratedLegendre;
    else if (basis_kind == "piecewise_linear_hat")
      kind = driftopt::BasisKind::PiecewiseLinearHat;
    else if (basis_kind == "monomial")
      kind = driftopt::BasisKind::Monomial;
    else
      throw ConfigError("problem.basis.kind: unknown basis kind '" + basis_kind + "'");
    return {kind, basis_n, horizon_T};
  }

  driftopt::FeasibleSetSpec feasible() const {
    if (feasible_kind == "l2_ball") return driftopt::FeasibleSetSpec::ball(radius);
    if (feasible_kind == "box") return driftopt::FeasibleSetSpec::box(lower, upper);
    throw ConfigError("problem.feasible.kind: expected 'l2_ball' or 'box'");
  }

  driftopt::PathBatchSpec batch_spec() const {
    driftopt::PathBatchSpec ps;
    ps.count_N = N;
    ps.scheme = path_scheme();
    ps.sigma = sigma;
    ps.initial_x = initial_x;
    ps.seed = seed;
    return ps;
  }

  driftopt::MirrorDescentConfig mirror_config() const {
    driftopt::MirrorDescentConfig c;
    c.num_steps_k = k;
    c.eta0 = eta0;
    c.tie_tol = tie_tol;
    if (kbar_mode == "cost_bounds")
      c.kbar_mode = driftopt::KbarMode::FromCostBounds;
    else if (kbar_mode == "gradient_norms")
      c.kbar_mode = driftopt::KbarMode::FromGradientNorms;
    else
      throw ConfigError("solver.kbar_mode: expected 'cost_bounds' or 'gradient_norms'");
    return c;
  }

  ordered_json resolved() const {
    ordered_json cost_j{{"preset", cost_preset}, {"a1", a1}, {"a2", a2}};
    if (cost_preset == "terminal_tracking") cost_j["target"] = target;
    ordered_json feas_j{{"kind", feasible_kind}};
    if (feasible_kind == "l2_ball")
      feas_j["radius"] = radius;
    else {
      feas_j["lower"] = lower;
      feas_j["upper"] = upper;
    }
    ordered_json j;
    j["problem"] = {{"horizon_T", horizon_T},
                    {"sigma", sigma},
                    {"initial_x", initial_x},
                    {"cost", cost_j},
                    {"basis", {{"kind", basis_kind}, {"n", basis_n}}},
                    {"feasible", feas_j}};
    j["solver"] = {{"N", N},          {"h", h},
                   {"k", k},          {"eta0", eta0},
                   {"scheme", scheme}, {"kbar_mode", kbar_mode},
                   {"seed", seed},    {"tie_tol", tie_tol},
                   {"memory_cap_mb", memory_cap_mb}};
    j["study"] = {{"which", studies},
                  {"unbiasedness",
                   {{"num_batches", study_num_batches}, {"batch_N", study_batch_N}}},
                  {"equiconvergence",
                   {{"N_values", study_N_values},
                    {"probes", study_probes},
                    {"reference_multiple", study_reference_multiple},
                    {"replications", study_replications}}},
                  {"rate", {{"replications", rate_replications}}}};
    std::vector<std::string> formats;
    if (emit_json) formats.push_back("json");
    if (emit_csv) formats.push_back("csv");
    j["output"] = {{"dir", out_dir}, {"formats", formats}};
    return j;
  }
};

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string raw = buffer.str();

  ordered_json j;
  try {
    j = ordered_json::parse(raw);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }

  ExperimentConfig cfg;
  reject_unknown_keys(j, "config", {"problem", "solver", "study", "output"}, raw);

  if (j.contains("problem")) {
    const auto& p = j["problem"];
    reject_unknown_keys(
        p, "problem",
        {"horizon_T", "sigma", "initial_x", "cost", "basis", "feasible"}, raw);
    cfg.horizon_T = get_or(p, "horizon_T", cfg.horizon_T, "problem");
    cfg.sigma = get_or(p, "sigma", cfg.sigma, "problem");
    cfg.initial_x = get_or(p, "initial_x", cfg.initial_x, "problem");
    if (p.contains("cost")) {
      const auto& c = p["cost"];
      reject_unknown_keys(c, "problem.cost", {"preset", "a1", "a2", "target"}, raw);
      cfg.cost_preset = get_or<std::string>(c, "preset", cfg.cost_preset, "problem.cost");
      cfg.a1 = get_or(c, "a1", cfg.a1, "problem.cost");
      cfg.a2 = get_or(c, "a2", cfg.a2, "problem.cost");
      cfg.target = get_or(c, "target", cfg.target, "problem.cost");
    }
    if (p.contains("basis")) {
      const auto& b = p["basis"];
      reject_unknown_keys(b, "problem.basis", {"kind", "n"}, raw);
      cfg.basis_kind = get_or<std::string>(b, "kind", cfg.basis_kind, "problem.basis");
      cfg.basis_n = get_or(b, "n", cfg.basis_n, "problem.basis");
    }
    if (p.contains("feasible")) {
      const auto& f = p["feasible"];
      reject_unknown_keys(f, "problem.feasible", {"kind", "radius", "lower", "upper"},
                          raw);
      cfg.feasible_kind =
          get_or<std::string>(f, "kind", cfg.feasible_kind, "problem.feasible");
      cfg.radius = get_or(f, "radius", cfg.radius, "problem.feasible");
      cfg.lower = get_or(f, "lower", cfg.lower, "problem.feasible");
      cfg.upper = get_or(f, "upper", cfg.upper, "problem.feasible");
    }
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    reject_unknown_keys(s, "solver",
                        {"N", "h", "k", "eta0", "scheme", "kbar_mode", "seed", "tie_tol",
                         "memory_cap_mb"},
                        raw);
    cfg.N = get_or(s, "N", cfg.N, "solver");
    cfg.h = get_or(s, "h", cfg.h, "solver");
    cfg.k = get_or(s, "k", cfg.k, "solver");
    cfg.eta0 = get_or(s, "eta0", cfg.eta0, "solver");
    cfg.scheme = get_or<std::string>(s, "scheme", cfg.scheme, "solver");
    cfg.kbar_mode = get_or<std::string>(s, "kbar_mode", cfg.kbar_mode, "solver");
    cfg.seed = get_or(s, "seed", cfg.seed, "solver");
    cfg.tie_tol = get_or(s, "tie_tol", cfg.tie_tol, "solver");
    cfg.memory_cap_mb = get_or(s, "memory_cap_mb", cfg.memory_cap_mb, "solver");
  }
  if (j.contains("study")) {
    const auto& s = j["study"];
    reject_unknown_keys(s, "study", {"which", "unbiasedness", "equiconvergence", "rate"},
                        raw);
    cfg.studies = get_or(s, "which", cfg.studies, "study");
    if (s.contains("unbiasedness")) {
      const auto& u = s["unbiasedness"];
      reject_unknown_keys(u, "study.unbiasedness", {"num_batches", "batch_N"}, raw);
      cfg.study_num_batches =
          get_or(u, "num_batches", cfg.study_num_batches, "study.unbiasedness");
      cfg.study_batch_N = get_or(u, "batch_N", cfg.study_batch_N, "study.unbiasedness");
    }
    if (s.contains("equiconvergence")) {
      const auto& e = s["equiconvergence"];
      reject_unknown_keys(
          e, "study.equiconvergence",
          {"N_values", "probes", "reference_multiple", "replications"}, raw);
      cfg.study_N_values =
          get_or(e, "N_values", cfg.study_N_values, "study.equiconvergence");
      cfg.study_probes = get_or(e, "probes", cfg.study_probes, "study.equiconvergence");
      cfg.study_reference_multiple = get_or(e, "reference_multiple",
                                            cfg.study_reference_multiple,
                                            "study.equiconvergence");
      cfg.study_replications =
          get_or(e, "replications", cfg.study_replications, "study.equiconvergence");
    }
    if (s.contains("rate")) {
      const auto& r = s["rate"];
      reject_unknown_keys(r, "study.rate", {"replications"}, raw);
      cfg.rate_replications =
          get_or(r, "replications", cfg.rate_replications, "study.rate");
    }
  }
  if (j.contains("output")) {
    const auto& o = j["output"];
    reject_unknown_keys(o, "output", {"dir", "formats"}, raw);
    cfg.out_dir = get_or<std::string>(o, "dir", cfg.out_dir, "output");
    if (o.contains("formats")) {
      const auto formats = o["formats"].get<std::vector<std::string>>();
      cfg.emit_json = cfg.emit_csv = false;
      for (const auto& f : formats) {
        if (f == "json")
          cfg.emit_json = true;
        else if (f == "csv")
          cfg.emit_csv = true;
        else
          throw ConfigError("output.formats: unknown format '" + f + "'");
      }
    }
  }

  // validate against module preconditions before any computation
  cfg.grid();
  cfg.cost();
  cfg.basis().validate();
  const auto feas = cfg.feasible();
  feas.check_dimension(cfg.basis_n);
  std::vector<double> origin(cfg.basis_n, 0.0);
  if (!feas.contains(origin))
    throw ConfigError("problem.feasible: must contain the zero drift start");
  cfg.path_scheme();
  cfg.mirror_config().validate();
  if (cfg.N < 1) throw ConfigError("solver.N: must be >= 1");
  return cfg;
}

// ---------------------------------------------------------------------------
// output helpers
// ---------------------------------------------------------------------------

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

fs::path prepare_out_dir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

struct CommonOptions {
  std::string config_path;
  std::string out_override;
  std::optional<std::uint64_t> seed_override;
  int threads = 0;
  std::string format;
};

ExperimentConfig load_config(const CommonOptions& opt) {
  ExperimentConfig cfg = parse_config(opt.config_path);
  if (opt.seed_override) cfg.seed = *opt.seed_override;
  if (!opt.out_override.empty()) cfg.out_dir = opt.out_override;
  if (const char* env = std::getenv("DRIFTOPT_OUT"); env && *env) cfg.out_dir = env;
  if (!opt.format.empty()) {
    cfg.emit_json = opt.format == "json";
    cfg.emit_csv = opt.format == "csv";
  }
  driftopt::set_num_threads(opt.threads);
  return cfg;
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_optimize(const ExperimentConfig& cfg) {
  const auto grid = cfg.grid();
  const auto batch = driftopt::generate_paths(cfg.batch_spec(), grid,
                                              cfg.memory_cap_mb * std::size_t{1} << 20);
  const auto cost = cfg.cost();
  const auto basis = cfg.basis();
  const auto feas = cfg.feasible();
  const auto trace = driftopt::mirror_descent(batch, cost, basis, feas,
                                              cfg.mirror_config());

  const fs::path out = prepare_out_dir(cfg.out_dir);
  if (cfg.emit_csv) {
    std::ostringstream csv;
    driftopt::write_trace_csv(trace, csv);
    write_text(out / "trace.csv", csv.str());
  }
  if (cfg.emit_json) {
    const auto drift = driftopt::evaluate_drift(trace.averaged_solution, grid);
    ordered_json solution;
    solution["config"] = cfg.resolved();
    solution["coefficients"] = trace.averaged_solution.coefficients;
    solution["objective"] = trace.averaged_objective;
    solution["objective_std_error"] = trace.averaged_objective_std_error;
    solution["drift_times"] = std::vector<double>(grid.times().begin(),
                                                  grid.times().end());
    solution["drift_values"] = drift.values;
    write_json(out / "solution.json", solution);

    // bound constants estimated from the batch
    const auto bm = driftopt::evaluate_basis(basis, grid);
    const double drift_bound = driftopt::feasible_drift_sup_bound(feas, bm);
    const auto kz = driftopt::batch_path_lipschitz(batch, cost, drift_bound, cfg.tie_tol);
    const auto kstats = driftopt::mean_and_std_error(kz);
    double k2 = 0;
    for (double v : kz) k2 += v * v;
    k2 /= static_cast<double>(kz.size());
    const double var_k = k2 - kstats.mean * kstats.mean;
    const double diam = driftopt::feasible_sup_diameter(feas, bm);
    driftopt::DriftFunction zero{basis, std::vector<double>(basis.dimension_n, 0.0)};
    const auto at_zero = driftopt::per_path_costs(
        batch, driftopt::evaluate_drift(zero, bm, grid), cost, cfg.tie_tol);
    const auto zero_stats = driftopt::mean_and_std_error(at_zero);
    const double sigma0 =
        zero_stats.std_error * std::sqrt(static_cast<double>(at_zero.size()));
    const double kd = static_cast<double>(cfg.k);
    const double c1 = std::sqrt(2.0 * trace.radius_R * trace.radius_R *
                                (var_k / kd + k2));
    const double c2 = 3.0 * (diam * std::sqrt(k2) + sigma0);
    const double beta = driftopt::weak_order(cfg.path_scheme());
    const double bound = c1 / std::sqrt(kd) + c2 / std::sqrt(double(cfg.N)) +
                         1.0 * std::pow(cfg.h, beta) +
                         kstats.mean * std::pow(double(cfg.basis_n), -1.0);

    ordered_json summary;
    summary["config"] = cfg.resolved();
    summary["step_size"] = trace.step_size;
    summary["radius_R"] = trace.radius_R;
    summary["kbar"] = trace.kbar;
    summary["iterations"] = cfg.k;
    summary["objective"] = trace.averaged_objective;
    summary["objective_std_error"] = trace.averaged_objective_std_error;
    summary["error_bound"] = {{"c1", c1},
                              {"c2", c2},
                              {"c3_nominal", 1.0},
                              {"c4", kstats.mean},
                              {"alpha_nominal", 1.0},
                              {"beta", beta},
                              {"value", bound}};
    write_json(out / "summary.json", summary);
  }
  std::cout << "optimize: objective " << trace.averaged_objective << " (se "
            << trace.averaged_objective_std_error << "), " << cfg.k << " steps in "
            << trace.wall_seconds << " s -> " << out.string() << "\n";
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& coeffs_arg) {
  std::vector<double> coeffs;
  std::stringstream ss(coeffs_arg);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty()) coeffs.push_back(std::stod(cell));
  }
  if (coeffs.size() != cfg.basis_n)
    throw ConfigError("evaluate: expected " + std::to_string(cfg.basis_n) +
                      " coefficients, got " + std::to_string(coeffs.size()));

  const auto grid = cfg.grid();
  const auto batch = driftopt::generate_paths(cfg.batch_spec(), grid,
                                              cfg.memory_cap_mb * std::size_t{1} << 20);
  const driftopt::DriftFunction f{cfg.basis(), coeffs};
  const auto result = driftopt::saa_objective(batch, f, cfg.cost(), cfg.tie_tol);

  const fs::path out = prepare_out_dir(cfg.out_dir);
  if (cfg.emit_json) {
    ordered_json j;
    j["config"] = cfg.resolved();
    j["coefficients"] = coeffs;
    j["objective"] = result.mean;
    j["objective_std_error"] = result.std_error;
    j["num_paths"] = cfg.N;
    write_json(out / "evaluate.json", j);
  }
  std::cout << "evaluate: objective " << result.mean << " +- " << result.std_error
            << " (1 se, N=" << cfg.N << ")\n";
  return 0;
}

int cmd_allocate(const std::string& model_path, double budget, const std::string& out_dir,
                 bool emit_json) {
  std::ifstream in(model_path);
  if (!in) throw ConfigError("cannot open error-model file '" + model_path + "'");
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("error-model parse error: " + std::string(e.what()));
  }
  std::stringstream raw;
  raw << j.dump();
  reject_unknown_keys(j, "model", {"c1", "c2", "c3", "c4", "alpha", "beta"}, raw.str());
  driftopt::ErrorModel model;
  model.c1 = get_or(j, "c1", 1.0, "model");
  model.c2 = get_or(j, "c2", 1.0, "model");
  model.c3 = get_or(j, "c3", 1.0, "model");
  model.c4 = get_or(j, "c4", 1.0, "model");
  model.alpha = get_or(j, "alpha", 1.0, "model");
  model.beta = get_or(j, "beta", 1.0, "model");
  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(budget > 0)) throw ConfigError("allocate: budget must be positive");

  const auto numeric = driftopt::allocate_numeric(model, budget);
  std::optional<driftopt::BudgetAllocation> closed;
  if (model.alpha == 1.0 && model.beta == 1.0)
    closed = driftopt::allocate_closed_form(model, budget);

  const auto row = [](const char* name, const driftopt::BudgetAllocation& a) {
    std::printf("%-12s %10lld %10lld %8lld %12.6g %14.6g\n", name, a.k, a.N, a.n, a.h,
                a.predicted_bound);
  };
  std::printf("%-12s %10s %10s %8s %12s %14s\n", "method", "k", "N", "n", "h", "bound");
  if (closed) row("closed_form", *closed);
  row("numeric", numeric);
  if (closed) {
    const double dk = std::abs(closed->k_real - numeric.k_real) / closed->k_real;
    const double dN = std::abs(closed->N_real - numeric.N_real) / closed->N_real;
    const double dn = std::abs(closed->n_real - numeric.n_real) / closed->n_real;
    std::printf("closed-form vs numeric agreement: max component deviation %.3g%%\n",
                100.0 * std::max({dk, dN, dn}));
  }
  if (numeric.convexity_warning)
    std::printf("warning: beta < 1, reduced objective may be non-convex\n");
  if (!numeric.converged) std::printf("warning: numeric solver did not fully converge\n");

  if (emit_json) {
    const fs::path out = prepare_out_dir(out_dir);
    ordered_json report;
    report["model"] = {{"c1", model.c1}, {"c2", model.c2},      {"c3", model.c3},
                       {"c4", model.c4}, {"alpha", model.alpha}, {"beta", model.beta}};
    report["budget"] = budget;
    const auto to_json = [](const driftopt::BudgetAllocation& a) {
      return ordered_json{{"k", a.k},
                          {"N", a.N},
                          {"n", a.n},
                          {"h", a.h},
                          {"k_real", a.k_real},
                          {"N_real", a.N_real},
                          {"n_real", a.n_real},
                          {"h_real", a.h_real},
                          {"predicted_bound", a.predicted_bound},
                          {"convexity_warning", a.convexity_warning},
                          {"converged", a.converged}};
    };
    report["numeric"] = to_json(numeric);
    if (closed) report["closed_form"] = to_json(*closed);
    write_json(out / "allocation.json", report);
  }
  return 0;
}

int cmd_study(const ExperimentConfig& cfg) {
  const auto grid = cfg.grid();
  const auto cost = cfg.cost();
  const fs::path out = prepare_out_dir(cfg.out_dir);

  bool any_inconclusive = false;
  const auto emit = [&](const driftopt::oracles::StudyReport& report) {
    if (cfg.emit_json) write_json(out / (report.study_name + "_report.json"),
                                  report.to_json());
    if (cfg.emit_csv) {
      std::ostringstream csv;
      report.write_points_csv(csv);
      write_text(out / (report.study_name + "_points.csv"), csv.str());
    }
    std::cout << "study " << report.study_name << ": "
              << (report.passed ? "pass" : "fail")
              << (report.inconclusive ? " (inconclusive)" : "") << "\n";
    any_inconclusive = any_inconclusive || report.inconclusive;
  };

  for (const std::string& which : cfg.studies) {
    if (which == "unbiasedness") {
      driftopt::oracles::UnbiasednessConfig ucfg;
      ucfg.num_batches = cfg.study_num_batches;
      ucfg.batch_N = cfg.study_batch_N;
      ucfg.sigma = cfg.sigma;
      ucfg.initial_x = cfg.initial_x;
      ucfg.scheme = cfg.path_scheme();
      ucfg.seed = cfg.seed;
      const auto basis = cfg.basis();
      const driftopt::DriftFunction zero{basis,
                                         std::vector<double>(basis.dimension_n, 0.0)};
      driftopt::BasisSpec first{basis.kind, 1, basis.horizon_T};
      driftopt::DirectionPath u =
          driftopt::evaluate_drift({first, {1.0}}, grid);
      emit(driftopt::oracles::unbiasedness_study(ucfg, zero, u, cost, grid));
    } else if (which == "equiconvergence") {
      driftopt::oracles::EquiconvergenceConfig ecfg;
      ecfg.N_values = cfg.study_N_values;
      ecfg.probe_count = cfg.study_probes;
      ecfg.reference_multiple = cfg.study_reference_multiple;
      ecfg.replications = cfg.study_replications;
      ecfg.sigma = cfg.sigma;
      ecfg.initial_x = cfg.initial_x;
      ecfg.scheme = cfg.path_scheme();
      ecfg.seed = cfg.seed;
      ecfg.probe_basis = cfg.basis();
      ecfg.probe_feas = cfg.feasible();
      emit(driftopt::oracles::equiconvergence_study(ecfg, cost, grid));
    } else if (which == "rate_k" || which == "rate_N" || which == "rate_h" ||
               which == "rate_n") {
      driftopt::oracles::SweepParameter sweep;
      if (which == "rate_k")
        sweep = driftopt::oracles::SweepParameter::OptimizationSteps;
      else if (which == "rate_N")
        sweep = driftopt::oracles::SweepParameter::SampleCount;
      else if (which == "rate_h")
        sweep = driftopt::oracles::SweepParameter::TimeStep;
      else
        sweep = driftopt::oracles::SweepParameter::BasisDimension;
      auto rcfg = driftopt::oracles::default_rate_study(sweep, cfg.seed);
      if (cfg.rate_replications > 0) rcfg.replications = cfg.rate_replications;
      emit(driftopt::oracles::rate_decomposition_study(rcfg));
    } else {
      throw ConfigError("study.which: unknown study '" + which + "'");
    }
  }
  // inconclusive studies are reported but do not fail the run
  return 0;
}

int cmd_paths_export(const ExperimentConfig& cfg) {
  const auto grid = cfg.grid();
  const auto batch = driftopt::generate_paths(cfg.batch_spec(), grid,
                                              cfg.memory_cap_mb * std::size_t{1} << 20);
  const fs::path out = prepare_out_dir(cfg.out_dir);
  std::ostringstream csv;
  driftopt::write_paths_csv(batch, csv);
  write_text(out / "paths.csv", csv.str());
  std::cout << "paths-export: " << cfg.N << " paths x " << grid.num_points()
            << " points -> " << (out / "paths.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"drift optimization of Skorokhod-regulated sample paths"};
  app.require_subcommand(1);

  CommonOptions opt;
  std::string coeffs_arg;
  std::string model_path;
  double budget = 1e6;

  const auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", opt.config_path, "experiment config (JSON)");
    if (needs_config) c->required();
    sub->add_option("--out", opt.out_override, "output directory");
    sub->add_option("--seed", opt.seed_override, "seed override");
    sub->add_option("--threads", opt.threads, "worker thread cap (0 = all cores)");
    sub->add_option("--format", opt.format, "restrict outputs: json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
  };

  auto* optimize = app.add_subcommand("optimize", "run mirror descent on the SAA problem");
  add_common(optimize, true);
  auto* allocate = app.add_subcommand("allocate", "optimal budget split (k, N, n, h)");
  allocate->add_option("--model", model_path, "error-model JSON (c1..c4, alpha, beta)")
      ->required();
  allocate->add_option("--budget", budget, "total budget B")->required();
  allocate->add_option("--out", opt.out_override, "output directory");
  allocate->add_option("--threads", opt.threads, "worker thread cap (0 = all cores)");
  allocate->add_option("--format", opt.format, "restrict outputs: json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  auto* study = app.add_subcommand("study", "statistical studies from the config");
  add_common(study, true);
  auto* evaluate = app.add_subcommand("evaluate", "objective with CI at a given drift");
  add_common(evaluate, true);
  evaluate->add_option("--coeffs", coeffs_arg, "comma-separated drift coefficients")
      ->required();
  auto* paths_export = app.add_subcommand("paths-export", "write the path batch as CSV");
  add_common(paths_export, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (allocate->parsed()) {
      std::string dir = opt.out_override.empty() ? "out" : opt.out_override;
      if (const char* env = std::getenv("DRIFTOPT_OUT"); env && *env) dir = env;
      return cmd_allocate(model_path, budget, dir, opt.format != "csv");
    }
    const ExperimentConfig cfg = load_config(opt);
    if (optimize->parsed()) return cmd_optimize(cfg);
    if (study->parsed()) return cmd_study(cfg);
    if (evaluate->parsed()) return cmd_evaluate(cfg, coeffs_arg);
    if (paths_export->parsed()) return cmd_paths_export(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
