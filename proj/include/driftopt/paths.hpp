#pragma once

// Sample-path generation for the scalar driving process (sigma-scaled
// Brownian motion started at a point). Two schemes, both of weak order 1:
//   EulerIncrements  - independent Gaussian increments per grid step.
//   HaarWaveletLevy  - Levy-Ciesielski partial sum keeping every Haar level
//                      whose tent support is at least as wide as the step.
// Path j is a pure function of (seed, j, grid, scheme).

#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "driftopt/grid.hpp"
#include "driftopt/parallel.hpp"
#include "driftopt/rng.hpp"

namespace driftopt {

enum class PathScheme { EulerIncrements, HaarWaveletLevy };

/// Weak convergence order used by the budget allocator.
inline double weak_order(PathScheme) { return 1.0; }

struct PathBatchSpec {
  std::size_t count_N = 1;
  PathScheme scheme = PathScheme::EulerIncrements;
  double sigma = 1.0;
  double initial_x = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (count_N < 1) throw std::invalid_argument("PathBatchSpec: count_N must be >= 1");
    if (!(sigma > 0.0)) throw std::invalid_argument("PathBatchSpec: sigma must be positive");
  }
};

namespace detail {

inline void euler_path(const PathBatchSpec& spec, const GridSpec& grid,
                       std::size_t path_index, std::span<double> out) {
  CounterRng rng(spec.seed, path_index);
  out[0] = spec.initial_x;
  for (std::size_t i = 1; i < grid.num_points(); ++i) {
    const double dt = grid.time(i) - grid.time(i - 1);
    out[i] = out[i - 1] + spec.sigma * std::sqrt(dt) * rng.normal();
  }
}

/// Deepest Haar level whose tents are at least `h` wide.
inline int haar_levels(const GridSpec& grid) {
  return static_cast<int>(std::floor(std::log2(grid.horizon() / grid.step()) + 1e-9));
}

inline void haar_path(const PathBatchSpec& spec, const GridSpec& grid,
                      std::size_t path_index, std::span<double> out) {
  const std::uint64_t key = stream_key(spec.seed, path_index);
  const int levels = haar_levels(grid);
  const double T = grid.horizon();
  const double scale = spec.sigma * std::sqrt(T);
  const double xi0 = gaussian_at(key, 0);
  for (std::size_t i = 0; i < grid.num_points(); ++i) {
    const double s = grid.time(i) / T;
    double w = xi0 * s;
    for (int l = 0; l <= levels; ++l) {
      const double cells = std::exp2(static_cast<double>(l));
      double pos = s * cells;
      auto cell = static_cast<std::uint64_t>(pos);
      if (cell >= static_cast<std::uint64_t>(cells))
        cell = static_cast<std::uint64_t>(cells) - 1;
      const double u = pos - static_cast<double>(cell);
      const double tent = 1.0 - std::abs(2.0 * u - 1.0);
      if (tent > 0.0) {
        const std::uint64_t idx = (std::uint64_t{1} << l) + cell;
        w += gaussian_at(key, idx) * std::exp2(-0.5 * l - 1.0) * tent;
      }
    }
    out[i] = spec.initial_x + scale * w;
  }
}

inline void generate_one(const PathBatchSpec& spec, const GridSpec& grid,
                         std::size_t path_index, std::span<double> out) {
  switch (spec.scheme) {
    case PathScheme::EulerIncrements:
      euler_path(spec, grid, path_index, out);
      break;
    case PathScheme::HaarWaveletLevy:
      haar_path(spec, grid, path_index, out);
      break;
  }
}

}  // namespace detail

/// An immutable batch of N paths on one grid. Either fully materialized
/// (row-major N x M storage) or lazy, regenerating each path from its seed
/// on access; the two modes produce bit-identical values.
class PathBatch {
 public:
  static PathBatch stored(const PathBatchSpec& spec, const GridSpec& grid) {
    spec.validate();
    PathBatch b(spec, grid, /*stored=*/true);
    const std::size_t m = grid.num_points();
    b.values_.resize(spec.count_N * m);
    parallel_for(spec.count_N, [&](std::size_t j) {
      detail::generate_one(spec, grid, j, std::span<double>(&b.values_[j * m], m));
    });
    return b;
  }

  static PathBatch lazy(const PathBatchSpec& spec, const GridSpec& grid) {
    spec.validate();
    return PathBatch(spec, grid, /*stored=*/false);
  }

  static PathBatch from_values(const GridSpec& grid, std::vector<double> row_major,
                               std::size_t count) {
    if (count < 1 || row_major.size() != count * grid.num_points())
      throw std::invalid_argument("PathBatch::from_values: size mismatch");
    PathBatchSpec spec;
    spec.count_N = count;
    PathBatch b(spec, grid, /*stored=*/true);
    b.values_ = std::move(row_major);
    b.synthetic_ = true;
    return b;
  }

  std::size_t count() const { return spec_.count_N; }
  const GridSpec& grid() const { return grid_; }
  const PathBatchSpec& spec() const { return spec_; }
  bool is_stored() const { return stored_; }

  /// View of path j. When lazy, fills `scratch` (resized as needed).
  std::span<const double> path(std::size_t j, std::vector<double>& scratch) const {
    const std::size_t m = grid_.num_points();
    if (stored_) return {&values_[j * m], m};
    scratch.resize(m);
    detail::generate_one(spec_, grid_, j, scratch);
    return {scratch.data(), scratch.size()};
  }

 private:
  PathBatch(const PathBatchSpec& spec, const GridSpec& grid, bool stored)
      : spec_(spec), grid_(grid), stored_(stored) {}

  PathBatchSpec spec_;
  GridSpec grid_;
  bool stored_ = false;
  bool synthetic_ = false;
  std::vector<double> values_;
};

/// Materializes unless N*M exceeds the cap (bytes), in which case paths are
/// regenerated from their seeds on access.
inline PathBatch generate_paths(const PathBatchSpec& spec, const GridSpec& grid,
                                std::size_t memory_cap_bytes = 0) {
  if (memory_cap_bytes > 0 &&
      spec.count_N * grid.num_points() * sizeof(double) > memory_cap_bytes)
    return PathBatch::lazy(spec, grid);
  return PathBatch::stored(spec, grid);
}

/// One row per path; the header row carries the grid times.
inline void write_paths_csv(const PathBatch& batch, std::ostream& os) {
  char buf[32];
  const auto put = [&](double v, bool first) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    if (!first) os << ',';
    os << buf;
  };
  const std::size_t m = batch.grid().num_points();
  for (std::size_t i = 0; i < m; ++i) put(batch.grid().time(i), i == 0);
  os << '\n';
  std::vector<double> scratch;
  for (std::size_t j = 0; j < batch.count(); ++j) {
    auto p = batch.path(j, scratch);
    for (std::size_t i = 0; i < m; ++i) put(p[i], i == 0);
    os << '\n';
  }
}

inline PathBatch read_paths_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line))
    throw std::invalid_argument("read_paths_csv: missing header row");
  auto parse_row = [](const std::string& text) {
    std::vector<double> row;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    return row;
  };
  const std::vector<double> times = parse_row(line);
  if (times.size() < 2)
    throw std::invalid_argument("read_paths_csv: header must hold >= 2 grid times");
  const double T = times.back();
  const double h = times[1] - times[0];
  GridSpec grid(T, h, times);
  std::vector<double> values;
  std::size_t count = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::vector<double> row = parse_row(line);
    if (row.size() != times.size())
      throw std::invalid_argument("read_paths_csv: ragged row");
    values.insert(values.end(), row.begin(), row.end());
    ++count;
  }
  return PathBatch::from_values(grid, std::move(values), count);
}

}  // namespace driftopt
