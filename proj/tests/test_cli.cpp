#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* env = std::getenv("DRIFTOPT_CLI");
  REQUIRE(env != nullptr);
  return env;
}

int run(const std::string& args) {
  const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("driftopt_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

const char* kMinimalConfig = R"({
  "problem": {
    "horizon_T": 1.0, "sigma": 1.0, "initial_x": 0.0,
    "cost": {"preset": "linear", "a1": 1.0, "a2": 1.0},
    "basis": {"kind": "integrated_legendre", "n": 2},
    "feasible": {"kind": "l2_ball", "radius": 1.0}
  },
  "solver": {"N": 16, "h": 0.125, "k": 8, "eta0": 0.5, "seed": 7},
  "output": {"dir": "OUTDIR"}
})";

std::string config_with_out(const fs::path& dir, const fs::path& out) {
  std::string text = kMinimalConfig;
  text.replace(text.find("OUTDIR"), 6, out.string());
  const fs::path cfg = dir / "config.json";
  write_file(cfg, text);
  return cfg.string();
}

}  // namespace

TEST_CASE("optimize smoke run writes the three outputs") {
  const auto dir = fresh_dir("smoke");
  const auto cfg = config_with_out(dir, dir / "out");
  REQUIRE(run("optimize --config " + cfg) == 0);
  CHECK(fs::exists(dir / "out" / "trace.csv"));
  CHECK(fs::exists(dir / "out" / "solution.json"));
  CHECK(fs::exists(dir / "out" / "summary.json"));
}

TEST_CASE("repeated runs are byte-identical") {
  const auto dir = fresh_dir("repeat");
  const auto cfg = config_with_out(dir, dir / "a");
  REQUIRE(run("optimize --config " + cfg) == 0);
  const std::string first = slurp(dir / "a" / "solution.json");
  const std::string first_summary = slurp(dir / "a" / "summary.json");
  REQUIRE(run("optimize --config " + cfg) == 0);
  CHECK(slurp(dir / "a" / "solution.json") == first);
  CHECK(slurp(dir / "a" / "summary.json") == first_summary);
}

TEST_CASE("malformed json exits with the config code") {
  const auto dir = fresh_dir("badjson");
  write_file(dir / "broken.json", "{ not json");
  CHECK(run("optimize --config " + (dir / "broken.json").string()) == 2);
}

TEST_CASE("unknown keys are rejected") {
  const auto dir = fresh_dir("unknown");
  write_file(dir / "config.json", R"({"problem": {"sigmma": 1.0}})");
  CHECK(run("optimize --config " + (dir / "config.json").string()) == 2);
}

TEST_CASE("evaluate rejects mismatched coefficient length") {
  const auto dir = fresh_dir("coeffs");
  const auto cfg = config_with_out(dir, dir / "out");
  CHECK(run("evaluate --config " + cfg + " --coeffs 0.1") == 2);
  CHECK(run("evaluate --config " + cfg + " --coeffs 0.1,0.2") == 0);
}

TEST_CASE("tracking solution improves on the zero drift") {
  const auto dir = fresh_dir("tracking");
  const std::string text = R"({
    "problem": {
      "sigma": 0.5,
      "cost": {"preset": "terminal_tracking", "a2": 1.0, "target": 1.0},
      "basis": {"kind": "integrated_legendre", "n": 2},
      "feasible": {"kind": "l2_ball", "radius": 2.0}
    },
    "solver": {"N": 512, "h": 0.03125, "k": 128, "eta0": 0.9,
               "kbar_mode": "gradient_norms", "seed": 3},
    "output": {"dir": ")" + (dir / "out").string() + R"("}
  })";
  write_file(dir / "config.json", text);
  REQUIRE(run("optimize --config " + (dir / "config.json").string()) == 0);
  REQUIRE(run("evaluate --config " + (dir / "config.json").string() +
              " --coeffs 0,0 --out " + (dir / "base").string()) == 0);

  // parse the two objective values
  const auto get_objective = [](const std::string& text_json) {
    const auto pos = text_json.find("\"objective\":");
    REQUIRE(pos != std::string::npos);
    return std::stod(text_json.substr(pos + 12));
  };
  const double solved = get_objective(slurp(dir / "out" / "solution.json"));
  const double baseline = get_objective(slurp(dir / "base" / "evaluate.json"));
  CHECK(solved <= baseline + 1e-9);
}

TEST_CASE("allocate prints a table and writes a report") {
  const auto dir = fresh_dir("allocate");
  write_file(dir / "model.json",
             R"({"c1": 1.0, "c2": 1.0, "c3": 1.0, "c4": 1.0, "alpha": 1.0, "beta": 1.0})");
  REQUIRE(run("allocate --model " + (dir / "model.json").string() +
              " --budget 1e6 --out " + (dir / "out").string()) == 0);
  const std::string report = slurp(dir / "out" / "allocation.json");
  CHECK(report.find("\"closed_form\"") != std::string::npos);
  CHECK(report.find("\"k\": 63") != std::string::npos);
  CHECK(run("allocate --model " + (dir / "model.json").string() + " --budget -1") == 2);
  write_file(dir / "bad.json", "{");
  CHECK(run("allocate --model " + (dir / "bad.json").string() + " --budget 1e6") == 2);
}

TEST_CASE("paths-export writes one row per path plus a header") {
  const auto dir = fresh_dir("paths");
  const auto cfg = config_with_out(dir, dir / "out");
  REQUIRE(run("paths-export --config " + cfg) == 0);
  const std::string csv = slurp(dir / "out" / "paths.csv");
  std::size_t rows = 0;
  for (char c : csv) rows += c == '\n';
  CHECK(rows == 17);  // header + 16 paths
}

TEST_CASE("environment variable overrides the output directory") {
  const auto dir = fresh_dir("envout");
  const auto cfg = config_with_out(dir, dir / "ignored");
  const std::string cmd = "DRIFTOPT_OUT=" + (dir / "env").string() + " " + cli_path() +
                          " optimize --config " + cfg + " >/dev/null 2>&1";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  CHECK(fs::exists(dir / "env" / "solution.json"));
  CHECK(!fs::exists(dir / "ignored" / "solution.json"));
}

TEST_CASE("study subcommand emits a report") {
  const auto dir = fresh_dir("study");
  const std::string text = R"({
    "problem": {
      "cost": {"preset": "linear"},
      "basis": {"kind": "integrated_legendre", "n": 2},
      "feasible": {"kind": "l2_ball", "radius": 1.0}
    },
    "solver": {"N": 16, "h": 0.125, "k": 8, "seed": 21},
    "study": {
      "which": ["unbiasedness", "equiconvergence"],
      "unbiasedness": {"num_batches": 5, "batch_N": 32},
      "equiconvergence": {"N_values": [16, 32, 64, 128], "probes": 3,
                          "reference_multiple": 8, "replications": 2}
    },
    "output": {"dir": ")" + (dir / "out").string() + R"("}
  })";
  write_file(dir / "config.json", text);
  REQUIRE(run("study --config " + (dir / "config.json").string()) == 0);
  CHECK(fs::exists(dir / "out" / "unbiasedness_report.json"));
  CHECK(fs::exists(dir / "out" / "unbiasedness_points.csv"));

  // slope report carries at least four points
  const std::string report = slurp(dir / "out" / "equiconvergence_report.json");
  std::size_t points = 0;
  for (std::size_t pos = 0; (pos = report.find("\"x\":", pos)) != std::string::npos; ++pos)
    ++points;
  CHECK(points >= 4);
}
