#pragma once

// Budget allocation: split a compute budget B across optimization steps k,
// Monte Carlo samples N, subspace dimension n, and step size h to minimize
//   c1/sqrt(k) + c2/sqrt(N) + c3 h^beta + c4 n^(-alpha)
// subject to k*n*N/h = B. Closed form for alpha = beta = 1; otherwise the
// reduced three-variable problem is solved in log space (where every term is
// exp(affine), hence convex) by coordinate Newton with multi-start.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace driftopt {

struct ErrorModel {
  double c1 = 1.0, c2 = 1.0, c3 = 1.0, c4 = 1.0;
  double alpha = 1.0;  // function-approximation rate, g(n) = n^(-alpha)
  double beta = 1.0;   // weak convergence order of the path scheme

  void validate() const {
    if (!(c1 > 0) || !(c2 > 0) || !(c3 > 0) || !(c4 > 0))
      throw std::invalid_argument("ErrorModel: constants must be positive");
    if (!(alpha > 0) || !(beta > 0))
      throw std::invalid_argument("ErrorModel: alpha and beta must be positive");
  }
  bool reduced_objective_convex() const { return beta >= 1.0; }
};

enum class AllocationMethod { ClosedFormAlpha1Beta1, Numeric };

struct BudgetAllocation {
  double budget_B = 0.0;
  long long k = 1, N = 1, n = 1;
  double h = 1.0;  // recomputed last so k*N*n/h == B exactly
  double predicted_bound = 0.0;
  AllocationMethod method = AllocationMethod::Numeric;
  // continuous optimum before integer rounding (used for exponent studies)
  double k_real = 1.0, N_real = 1.0, n_real = 1.0, h_real = 1.0;
  bool convexity_warning = false;
  bool converged = true;
};

/// Shared B-exponent of k* and N*: 2 a b / (a + b + 4 a b).
inline double budget_exponent_kN(double alpha, double beta) {
  return 2.0 * alpha * beta / (alpha + beta + 4.0 * alpha * beta);
}

inline double predict_bound(const ErrorModel& m, double k, double N, double n, double h) {
  return m.c1 / std::sqrt(k) + m.c2 / std::sqrt(N) + m.c3 * std::pow(h, m.beta) +
         m.c4 * std::pow(n, -m.alpha);
}

inline double predict_bound(const ErrorModel& m, const BudgetAllocation& a) {
  return predict_bound(m, static_cast<double>(a.k), static_cast<double>(a.N),
                       static_cast<double>(a.n), a.h);
}

namespace detail {

inline void round_and_repair(const ErrorModel& m, BudgetAllocation& a) {
  a.k = std::max(1LL, static_cast<long long>(std::llround(a.k_real)));
  a.N = std::max(1LL, static_cast<long long>(std::llround(a.N_real)));
  a.n = std::max(1LL, static_cast<long long>(std::llround(a.n_real)));
  a.h = static_cast<double>(a.k) * static_cast<double>(a.N) * static_cast<double>(a.n) /
        a.budget_B;
  a.predicted_bound = predict_bound(m, a);
}

}  // namespace detail

/// Closed form at alpha = beta = 1:
///   k* = 2^(-2/3) c1^( 4/3) c2^(-2/3) c3^(-1/3) c4^(-1/3) B^(1/3)
///   N* = 2^(-2/3) c1^(-2/3) c2^( 4/3) c3^(-1/3) c4^(-1/3) B^(1/3)
///   n* = 2^( 2/3) c1^(-1/3) c2^(-1/3) c3^(-1/6) c4^( 5/6) B^(1/6)
///   h* = 2^(-2/3) c1^( 1/3) c2^( 1/3) c3^(-5/6) c4^( 1/6) B^(-1/6)
inline BudgetAllocation allocate_closed_form(const ErrorModel& m, double B) {
  m.validate();
  if (!(B > 0)) throw std::invalid_argument("allocate_closed_form: budget must be positive");
  if (m.alpha != 1.0 || m.beta != 1.0)
    throw std::invalid_argument(
        "allocate_closed_form: requires alpha == 1 and beta == 1 (use the numeric solver)");

  const double c1 = m.c1, c2 = m.c2, c3 = m.c3, c4 = m.c4;
  BudgetAllocation a;
  a.budget_B = B;
  a.method = AllocationMethod::ClosedFormAlpha1Beta1;
  a.k_real = std::pow(2.0, -2.0 / 3.0) * std::pow(c1, 4.0 / 3.0) *
             std::pow(c2, -2.0 / 3.0) * std::pow(c3, -1.0 / 3.0) *
             std::pow(c4, -1.0 / 3.0) * std::pow(B, 1.0 / 3.0);
  a.N_real = std::pow(2.0, -2.0 / 3.0) * std::pow(c1, -2.0 / 3.0) *
             std::pow(c2, 4.0 / 3.0) * std::pow(c3, -1.0 / 3.0) *
             std::pow(c4, -1.0 / 3.0) * std::pow(B, 1.0 / 3.0);
  a.n_real = std::pow(2.0, 2.0 / 3.0) * std::pow(c1, -1.0 / 3.0) *
             std::pow(c2, -1.0 / 3.0) * std::pow(c3, -1.0 / 6.0) *
             std::pow(c4, 5.0 / 6.0) * std::pow(B, 1.0 / 6.0);
  a.h_real = a.k_real * a.N_real * a.n_real / B;
  detail::round_and_repair(m, a);
  return a;
}

struct AllocationBounds {
  double k_min = 1.0, k_max = 0.0;  // max 0 means "use the budget"
  double N_min = 1.0, N_max = 0.0;
  double n_min = 1.0, n_max = 0.0;
};

/// Minimizes c1 e^(-x1/2) + c2 e^(-x2/2) + c3 e^(beta (x1+x2+x3-log B))
/// + c4 e^(-alpha x3) over x = (log k, log N, log n), h eliminated through
/// the budget constraint. Coordinate Newton from 8 log-grid starts; the
/// second-order condition is checked numerically at the best point.
inline BudgetAllocation allocate_numeric(const ErrorModel& m, double B,
                                         const AllocationBounds& bounds = {}) {
  m.validate();
  if (!(B > 0)) throw std::invalid_argument("allocate_numeric: budget must be positive");

  const double logB = std::log(B);
  const std::array<double, 3> lo = {std::log(std::max(1.0, bounds.k_min)),
                                    std::log(std::max(1.0, bounds.N_min)),
                                    std::log(std::max(1.0, bounds.n_min))};
  const std::array<double, 3> hi = {
      bounds.k_max > 0 ? std::log(bounds.k_max) : logB,
      bounds.N_max > 0 ? std::log(bounds.N_max) : logB,
      bounds.n_max > 0 ? std::log(bounds.n_max) : logB};
  for (int i = 0; i < 3; ++i)
    if (!(lo[i] < hi[i])) throw std::invalid_argument("allocate_numeric: empty bounds");

  const auto value = [&](const std::array<double, 3>& x) {
    return m.c1 * std::exp(-0.5 * x[0]) + m.c2 * std::exp(-0.5 * x[1]) +
           m.c3 * std::exp(m.beta * (x[0] + x[1] + x[2] - logB)) +
           m.c4 * std::exp(-m.alpha * x[2]);
  };
  // first/second partial of the objective in coordinate i
  const auto partials = [&](const std::array<double, 3>& x, int i) {
    const double pen = m.c3 * std::exp(m.beta * (x[0] + x[1] + x[2] - logB));
    double g = m.beta * pen, h2 = m.beta * m.beta * pen;
    if (i < 2) {
      const double ci = i == 0 ? m.c1 : m.c2;
      const double e = ci * std::exp(-0.5 * x[i]);
      g -= 0.5 * e;
      h2 += 0.25 * e;
    } else {
      const double e = m.c4 * std::exp(-m.alpha * x[2]);
      g -= m.alpha * e;
      h2 += m.alpha * m.alpha * e;
    }
    return std::pair<double, double>{g, h2};
  };

  std::array<double, 3> best{};
  double best_value = std::numeric_limits<double>::infinity();
  bool best_converged = false;
  for (int s = 0; s < 8; ++s) {
    std::array<double, 3> x;
    for (int i = 0; i < 3; ++i) {
      const double frac = (s >> i) & 1 ? 0.75 : 0.25;
      x[i] = lo[i] + frac * (hi[i] - lo[i]);
    }
    bool converged = false;
    for (int cycle = 0; cycle < 500 && !converged; ++cycle) {
      double move = 0.0;
      for (int i = 0; i < 3; ++i) {
        const auto [g, h2] = partials(x, i);
        double step = h2 > 0 ? g / h2 : g;
        step = std::clamp(step, -2.0, 2.0);
        const double updated = std::clamp(x[i] - step, lo[i], hi[i]);
        move = std::max(move, std::abs(updated - x[i]));
        x[i] = updated;
      }
      converged = move < 1e-13;
    }
    const double v = value(x);
    if (v < best_value) {
      best_value = v;
      best = x;
      best_converged = converged;
    }
  }

  BudgetAllocation a;
  a.budget_B = B;
  a.method = AllocationMethod::Numeric;
  a.converged = best_converged;
  a.convexity_warning = !m.reduced_objective_convex();
  a.k_real = std::exp(best[0]);
  a.N_real = std::exp(best[1]);
  a.n_real = std::exp(best[2]);
  a.h_real = a.k_real * a.N_real * a.n_real / B;

  if (m.reduced_objective_convex()) {
    // positive-definite Hessian check (Sylvester minors) at the optimum
    std::array<std::array<double, 3>, 3> H{};
    const double pen = m.c3 * std::exp(m.beta * (best[0] + best[1] + best[2] - logB));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) H[i][j] = m.beta * m.beta * pen;
    H[0][0] += 0.25 * m.c1 * std::exp(-0.5 * best[0]);
    H[1][1] += 0.25 * m.c2 * std::exp(-0.5 * best[1]);
    H[2][2] += m.alpha * m.alpha * m.c4 * std::exp(-m.alpha * best[2]);
    const double m1 = H[0][0];
    const double m2 = H[0][0] * H[1][1] - H[0][1] * H[1][0];
    const double m3 = H[0][0] * (H[1][1] * H[2][2] - H[1][2] * H[2][1]) -
                      H[0][1] * (H[1][0] * H[2][2] - H[1][2] * H[2][0]) +
                      H[0][2] * (H[1][0] * H[2][1] - H[1][1] * H[2][0]);
    if (!(m1 > 0 && m2 > 0 && m3 > 0)) a.converged = false;
  }

  detail::round_and_repair(m, a);
  return a;
}

}  // namespace driftopt
