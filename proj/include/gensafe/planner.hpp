#pragma once

#include "gensafe/romdp.hpp"

namespace gensafe {

/// Reduced cost-value function over reduced states.
struct ReducedValueFunction {
  Vector values;
  int iterations_run = 0;
  double final_delta = 0.0;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, ReducedValueFunction last)
      : Error(what), last_(std::move(last)) {}
  const ReducedValueFunction& last() const { return last_; }

 private:
  ReducedValueFunction last_;
};

/// One in-place sweep over states in ascending order:
/// V(s) = sum_a pi(s,a) [C(s,a) + gamma sum_s' T(s,a,s') V(s')].
/// Returns the largest absolute change.
double value_sweep(const RomdpTables& tables, Vector& values);

/// Averaged value iteration. Stops once a sweep changes no value by
/// `tolerance` or more and the contraction bound gamma / (1 - gamma) times
/// that change is below `tolerance`, so values are within `tolerance` of the
/// fixed point.
ReducedValueFunction value_iteration(const RomdpTables& tables, double tolerance = 1e-4,
                                     int max_iterations = 10000);

}  // namespace gensafe
