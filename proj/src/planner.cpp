#include "gensafe/planner.hpp"

#include <algorithm>
#include <cmath>

namespace gensafe {

double value_sweep(const RomdpTables& t, Vector& v) {
  const int S = t.num_states, A = t.num_actions;
  double delta = 0.0;
  for (int s = 0; s < S; ++s) {
    double acc = 0.0;
    for (int a = 0; a < A; ++a) {
      const double p = t.pi(s, a);
      if (p == 0.0) continue;
      double tail = 0.0;
      for (int s2 = 0; s2 < S; ++s2) tail += t.t(s, a, s2) * v[static_cast<std::size_t>(s2)];
      acc += p * (t.c(s, a) + t.discount * tail);
    }
    delta = std::max(delta, std::abs(acc - v[static_cast<std::size_t>(s)]));
    v[static_cast<std::size_t>(s)] = acc;
  }
  return delta;
}

ReducedValueFunction value_iteration(const RomdpTables& t, double tolerance, int max_iterations) {
  if (!(t.discount >= 0.0 && t.discount < 1.0)) throw InvalidArgument("discount must lie in [0, 1)");
  if (!(tolerance > 0.0)) throw InvalidArgument("tolerance must be positive");
  if (max_iterations <= 0) throw InvalidArgument("iteration budget must be positive");
  ReducedValueFunction out;
  out.values.assign(static_cast<std::size_t>(t.num_states), 0.0);
  for (int it = 0; it < max_iterations; ++it) {
    out.final_delta = value_sweep(t, out.values);
    out.iterations_run = it + 1;
    if (!all_finite(out.values)) throw NumericDomainError("value iteration diverged");
    // Sup-norm contraction: |V - V*| <= gamma / (1 - gamma) * delta.
    if (out.final_delta < tolerance && t.discount * out.final_delta < tolerance * (1.0 - t.discount)) return out;
  }
  throw NonConvergenceError("value iteration did not converge within " +
                                std::to_string(max_iterations) + " sweeps",
                            std::move(out));
}

}  // namespace gensafe
