#pragma once

// One-sided Skorokhod regulation of discrete paths:
//   L(t) = max(0, max_{s<=t} -y(s)),   Gamma(y)(t) = y(t) + L(t).
// Alongside the regulated path we track, per index t, the set of indices
// attaining the running minimum within a tie tolerance; these sets carry the
// directional derivative of the regulator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "driftopt/grid.hpp"

namespace driftopt {

inline double default_tie_tol(const DiscretePath& y) {
  return 1e-12 * std::max(1.0, y.sup_norm());
}

struct RegulatedOutput {
  DiscretePath input;      // y
  DiscretePath regulated;  // Gamma(y)
  DiscretePath regulator;  // L
  std::vector<double> running_min;
  double tie_tol = 0.0;

  /// The argmin set is empty while the path has stayed above tie_tol.
  bool argmin_empty(std::size_t t) const { return running_min[t] > tie_tol; }

  /// Materialized argmin set at index t; O(t) scan, meant for debugging and
  /// oracle comparisons. Hot paths use ArgminScan instead.
  std::vector<std::size_t> argmin_set(std::size_t t) const {
    std::vector<std::size_t> set;
    if (argmin_empty(t)) return set;
    const double bar = running_min[t] + tie_tol;
    for (std::size_t s = 0; s <= t; ++s)
      if (input.values[s] <= bar) set.push_back(s);
    return set;
  }
};

/// Incremental view of the argmin sets: after advance(i) the active list is
/// exactly { s <= i : y(s) <= min_{r<=i} y(r) + tol }, in index order. Each
/// index is appended once and dropped at most once.
class ArgminScan {
 public:
  enum class Event { None, Appended, Rebuilt };

  ArgminScan(const std::vector<double>& y, double tol) : y_(y), tol_(tol) {
    active_.reserve(8);
  }

  Event advance(std::size_t i) {
    const double yi = y_[i];
    if (i == 0) {
      min_ = yi;
      active_.assign(1, 0);
      return Event::Rebuilt;
    }
    if (yi < min_) {
      min_ = yi;
      std::size_t keep = 0;
      for (std::size_t s : active_)
        if (y_[s] <= min_ + tol_) active_[keep++] = s;
      active_.resize(keep);
      active_.push_back(i);
      return Event::Rebuilt;
    }
    if (yi <= min_ + tol_) {
      active_.push_back(i);
      return Event::Appended;
    }
    return Event::None;
  }

  double running_min() const { return min_; }
  const std::vector<std::size_t>& active() const { return active_; }

 private:
  const std::vector<double>& y_;
  double tol_;
  double min_ = 0.0;
  std::vector<std::size_t> active_;
};

/// Single forward sweep; O(M) plus amortized argmin bookkeeping.
/// tie_tol < 0 selects the default 1e-12 * max(1, ||y||_inf).
inline RegulatedOutput skorokhod_regulate(const DiscretePath& y, double tie_tol = -1.0) {
  const std::size_t m = y.values.size();
  if (m == 0 || m != y.grid.num_points())
    throw std::invalid_argument("skorokhod_regulate: path/grid size mismatch");
  if (!y.all_finite())
    throw std::invalid_argument("skorokhod_regulate: non-finite path value");

  RegulatedOutput out;
  out.tie_tol = tie_tol < 0 ? default_tie_tol(y) : tie_tol;
  out.input = y;
  out.running_min.resize(m);
  out.regulator.grid = y.grid;
  out.regulator.values.resize(m);
  out.regulated.grid = y.grid;
  out.regulated.values.resize(m);

  double running = y.values[0];
  for (std::size_t i = 0; i < m; ++i) {
    running = std::min(running, y.values[i]);
    out.running_min[i] = running;
    const double level = std::max(0.0, -running);
    out.regulator.values[i] = level;
    out.regulated.values[i] = y.values[i] + level;
  }
  return out;
}

/// sup-norm ratio ||Gamma(y1)-Gamma(y2)|| / ||y1-y2||; 0 for identical paths.
inline double lipschitz_probe(const DiscretePath& y1, const DiscretePath& y2) {
  require_same_grid(y1, y2, "lipschitz_probe");
  const RegulatedOutput r1 = skorokhod_regulate(y1);
  const RegulatedOutput r2 = skorokhod_regulate(y2);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y1.values.size(); ++i) {
    num = std::max(num, std::abs(r1.regulated.values[i] - r2.regulated.values[i]));
    den = std::max(den, std::abs(y1.values[i] - y2.values[i]));
  }
  return den == 0.0 ? 0.0 : num / den;
}

/// Debug dump: t, y, L, Gamma, and the (materialized) argmin set.
inline void write_regulated_csv(const RegulatedOutput& reg, std::ostream& os) {
  os << "t,y,regulator,regulated,argmin_set\n";
  char buf[32];
  const auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < reg.input.values.size(); ++i) {
    os << fmt(reg.input.grid.time(i)) << ',' << fmt(reg.input.values[i]) << ','
       << fmt(reg.regulator.values[i]) << ',' << fmt(reg.regulated.values[i]) << ',';
    const auto set = reg.argmin_set(i);
    for (std::size_t s = 0; s < set.size(); ++s) {
      if (s) os << ';';
      os << set[s];
    }
    os << '\n';
  }
}

}  // namespace driftopt
