#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gensafe/planner.hpp"
#include "oracles.hpp"

using namespace gensafe;

namespace {

RomdpTables random_tables(std::mt19937_64& rng, int S, int A, double gamma) {
  std::uniform_int_distribution<int> n(50, 400);
  const auto data = oracle::random_reduced_samples(rng, n(rng), S, A);
  const auto epoch = oracle::random_reduced_samples(rng, n(rng) / 4, S, A);
  return assemble_tables(data, epoch, S, A, 0.5, gamma);
}

double max_abs_diff(const Vector& a, const Vector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("planner") {

TEST_CASE("zero costs give zero values after one sweep") {
  std::mt19937_64 rng(1);
  auto t = random_tables(rng, 6, 4, 0.99);
  std::fill(t.cost.cost.begin(), t.cost.cost.end(), 0.0);
  const auto v = value_iteration(t, 1e-8);
  CHECK(v.iterations_run == 1);
  for (double x : v.values) CHECK(x == 0.0);
}

TEST_CASE("self-loop is a geometric series") {
  const std::vector<ReducedSample> d{{0, 0, 0, 0.3}};
  const RomdpTables t = assemble_tables(d, d, 1, 1, 0.5, 0.9);
  const double tol = 1e-10;
  const auto v = value_iteration(t, tol, 100000);
  CHECK(std::abs(v.values[0] - 3.0) < 10 * tol);
  CHECK(v.final_delta < tol);
}

TEST_CASE("worked example matches the linear solve") {
  const auto ex = oracle::worked_example(0.5);
  const RomdpTables t = assemble_tables(ex.samples, ex.samples, 3, 2, 0.5, 0.99);
  const double tol = 1e-8;
  const auto v = value_iteration(t, tol, 100000);
  const Vector exact = oracle::linear_solve_values(t);
  CHECK(max_abs_diff(v.values, exact) < 10 * tol);
}

TEST_CASE("converged values are a fixed point") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const auto t = random_tables(rng, 15, 9, 0.95);
    const double tol = 1e-9;
    auto v = value_iteration(t, tol, 100000);
    for (double x : v.values) CHECK(x >= 0.0);
    Vector again = v.values;
    CHECK(value_sweep(t, again) <= tol);
  }
}

TEST_CASE("Jacobi reference sweeps contract by gamma") {
  std::mt19937_64 rng(3);
  const auto t = random_tables(rng, 12, 6, 0.9);
  Vector v(12, 0.0);
  double prev = INFINITY;
  for (int k = 0; k < 60; ++k) {
    const Vector next = oracle::jacobi_sweep(t, v);
    const double delta = max_abs_diff(next, v);
    if (k > 0) CHECK(delta <= t.discount * prev * (1.0 + 1e-9) + 1e-15);
    prev = delta;
    v = next;
  }
  // The library's Gauss-Seidel iteration reaches the same fixed point.
  const auto gs = value_iteration(t, 1e-12, 100000);
  CHECK(max_abs_diff(gs.values, oracle::linear_solve_values(t)) < 1e-10);
}

TEST_CASE("raising a cost never lowers a value") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> pick(0, 8 * 5 - 1);
  for (int rep = 0; rep < 20; ++rep) {
    auto t = random_tables(rng, 8, 5, 0.95);
    const auto base = value_iteration(t, 1e-11, 100000);
    t.cost.cost[static_cast<std::size_t>(pick(rng))] += 0.4;
    const auto raised = value_iteration(t, 1e-11, 100000);
    for (std::size_t s = 0; s < base.values.size(); ++s) CHECK(raised.values[s] >= base.values[s] - 1e-9);
  }
}

TEST_CASE("iteration budget exhaustion carries the last values") {
  std::mt19937_64 rng(5);
  const auto t = random_tables(rng, 10, 4, 0.99);
  try {
    value_iteration(t, 1e-12, 3);
    FAIL("expected non-convergence");
  } catch (const NonConvergenceError& e) {
    CHECK(e.last().iterations_run == 3);
    CHECK(e.last().values.size() == 10);
    CHECK(e.last().final_delta >= 1e-12);
  }
}

TEST_CASE("invalid discount is rejected") {
  const auto ex = oracle::worked_example();
  RomdpTables t = assemble_tables(ex.samples, ex.samples, 3, 2, 0.5, 1.0);
  CHECK_THROWS_AS(value_iteration(t), InvalidArgument);
}

}  // TEST_SUITE
