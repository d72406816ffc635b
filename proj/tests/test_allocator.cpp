#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "driftopt/allocator.hpp"
#include "driftopt/rng.hpp"
#include "driftopt/stats.hpp"

using namespace driftopt;

TEST_CASE("closed form with unit constants at B = 1e6") {
  const ErrorModel model;
  const auto a = allocate_closed_form(model, 1e6);
  CHECK(a.k_real == Catch::Approx(std::pow(2.0, -2.0 / 3.0) * 100.0));
  CHECK(a.N_real == Catch::Approx(std::pow(2.0, -2.0 / 3.0) * 100.0));
  CHECK(a.n_real == Catch::Approx(std::pow(2.0, 2.0 / 3.0) * 10.0));
  CHECK(a.h_real == Catch::Approx(std::pow(2.0, -2.0 / 3.0) * 0.1));
  CHECK(a.k == 63);
  CHECK(a.N == 63);
  CHECK(a.n == 16);
  // constraint restored exactly after rounding
  CHECK(static_cast<double>(a.k) * static_cast<double>(a.N) *
            static_cast<double>(a.n) / a.h ==
        Catch::Approx(1e6).epsilon(1e-14));
  // the continuous solution satisfies the constraint as well
  CHECK(a.k_real * a.N_real * a.n_real / a.h_real == Catch::Approx(1e6));
}

TEST_CASE("closed-form exponent equals the general formula at alpha=beta=1") {
  CHECK(budget_exponent_kN(1.0, 1.0) == Catch::Approx(1.0 / 3.0));
  const ErrorModel model;
  const auto a1 = allocate_closed_form(model, 1e4);
  const auto a2 = allocate_closed_form(model, 1e8);
  const double slope = std::log(a2.k_real / a1.k_real) / std::log(1e8 / 1e4);
  CHECK(slope == Catch::Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("jointly scaling all constants leaves the allocation invariant") {
  ErrorModel scaled;
  scaled.c1 = scaled.c2 = scaled.c3 = scaled.c4 = 7.3;
  const auto base = allocate_closed_form(ErrorModel{}, 1e6);
  const auto moved = allocate_closed_form(scaled, 1e6);
  CHECK(moved.k_real == Catch::Approx(base.k_real));
  CHECK(moved.N_real == Catch::Approx(base.N_real));
  CHECK(moved.n_real == Catch::Approx(base.n_real));
  CHECK(moved.h_real == Catch::Approx(base.h_real));
}

TEST_CASE("closed form rejects other exponents") {
  ErrorModel model;
  model.alpha = 2.0;
  CHECK_THROWS_AS(allocate_closed_form(model, 1e6), std::invalid_argument);
}

TEST_CASE("numeric solver matches the closed form at alpha=beta=1") {
  for (double B : {1e4, 1e6, 1e8}) {
    ErrorModel model;
    model.c1 = 2.0;
    model.c2 = 0.5;
    model.c3 = 1.5;
    model.c4 = 3.0;
    const auto closed = allocate_closed_form(model, B);
    const auto numeric = allocate_numeric(model, B);
    CHECK(numeric.converged);
    CHECK(numeric.k_real == Catch::Approx(closed.k_real).epsilon(0.02));
    CHECK(numeric.N_real == Catch::Approx(closed.N_real).epsilon(0.02));
    CHECK(numeric.n_real == Catch::Approx(closed.n_real).epsilon(0.02));
    CHECK(numeric.h_real == Catch::Approx(closed.h_real).epsilon(0.02));
  }
}

TEST_CASE("predict_bound direct evaluations") {
  const ErrorModel model;
  BudgetAllocation a;
  a.k = 4;
  a.N = 4;
  a.n = 1;
  a.h = 1.0;
  CHECK(predict_bound(model, a) == Catch::Approx(3.0));
  BudgetAllocation tiny;
  tiny.k = 1000000000000LL;
  tiny.N = 1000000000000LL;
  tiny.n = 1000000;
  tiny.h = 1e-6;
  // four terms of 1e-6 each
  CHECK(predict_bound(model, tiny) == Catch::Approx(4e-6));
}

TEST_CASE("optimal allocation beats random feasible allocations") {
  const ErrorModel model;
  const double B = 1e6;
  const auto best = allocate_closed_form(model, B);
  CounterRng rng(99, 0);
  for (int trial = 0; trial < 100; ++trial) {
    // random (k, N, n) on a log scale, h repaired from the constraint
    const double k = std::exp(rng.uniform01() * std::log(B / 4.0));
    const double N = std::exp(rng.uniform01() * std::log(B / (4.0 * k)));
    const double n = std::exp(rng.uniform01() * std::log(std::max(2.0, B / (4.0 * k * N))));
    const double h = k * N * n / B;
    const double bound = predict_bound(model, k, N, n, h);
    CHECK(best.predicted_bound <= bound * (1.0 + 1e-9));
  }
}

TEST_CASE("numeric optimum beats random allocations for general exponents") {
  ErrorModel model;
  model.alpha = 2.0;
  model.beta = 1.5;
  model.c2 = 2.0;
  const double B = 1e7;
  const auto best = allocate_numeric(model, B);
  CounterRng rng(123, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double k = std::exp(rng.uniform01() * std::log(B / 4.0));
    const double N = std::exp(rng.uniform01() * std::log(B / (4.0 * k)));
    const double n = std::exp(rng.uniform01() * std::log(std::max(2.0, B / (4.0 * k * N))));
    const double h = k * N * n / B;
    const double bound = predict_bound(model, k, N, n, h);
    CHECK(predict_bound(model, best.k_real, best.N_real, best.n_real, best.h_real) <=
          bound * (1.0 + 1e-9));
  }
}

TEST_CASE("fitted budget exponents match the rate formula") {
  const std::vector<double> budgets{1e4, 1e5, 1e6, 1e7, 1e8};
  for (double alpha : {1.0, 2.0}) {
    for (double beta : {1.0, 2.0}) {
      ErrorModel model;
      model.alpha = alpha;
      model.beta = beta;
      std::vector<double> ks, Ns;
      for (double B : budgets) {
        const auto a = allocate_numeric(model, B);
        ks.push_back(a.k_real);
        Ns.push_back(a.N_real);
      }
      const double gamma = budget_exponent_kN(alpha, beta);
      CHECK(fit_loglog(budgets, ks).slope == Catch::Approx(gamma).margin(0.03));
      CHECK(fit_loglog(budgets, Ns).slope == Catch::Approx(gamma).margin(0.03));
    }
  }
}

TEST_CASE("smooth function spaces pin n while rough ones consume the budget") {
  const std::vector<double> budgets{1e4, 1e5, 1e6, 1e7, 1e8};
  // alpha large: n* nearly constant in B
  {
    ErrorModel model;
    model.alpha = 1e3;
    std::vector<double> ns;
    for (double B : budgets) ns.push_back(allocate_numeric(model, B).n_real);
    CHECK(std::abs(fit_loglog(budgets, ns).slope) <= 0.02);
  }
  // alpha small: k*, N* exponents collapse while n* absorbs the budget
  // (2ab/(a+b+4ab) = 0.08 and b/(a+b+4ab) = 0.8 at alpha = 0.05, beta = 1)
  {
    ErrorModel model;
    model.alpha = 0.05;
    const std::vector<double> big{1e6, 1e7, 1e8, 1e9, 1e10};
    std::vector<double> ks, Ns, ns;
    for (double B : big) {
      const auto a = allocate_numeric(model, B);
      ks.push_back(a.k_real);
      Ns.push_back(a.N_real);
      ns.push_back(a.n_real);
    }
    CHECK(std::abs(fit_loglog(big, ks).slope) <= 0.15);
    CHECK(std::abs(fit_loglog(big, Ns).slope) <= 0.15);
    CHECK(fit_loglog(big, ns).slope >= 0.6);  // n* absorbs the budget
  }
}

TEST_CASE("beta below one carries a non-convexity warning") {
  ErrorModel model;
  model.beta = 0.5;
  const auto a = allocate_numeric(model, 1e6);
  CHECK(a.convexity_warning);
}

TEST_CASE("model validation") {
  ErrorModel bad;
  bad.c3 = 0.0;
  CHECK_THROWS_AS(allocate_numeric(bad, 1e6), std::invalid_argument);
  CHECK_THROWS_AS(allocate_numeric(ErrorModel{}, -1.0), std::invalid_argument);
}
