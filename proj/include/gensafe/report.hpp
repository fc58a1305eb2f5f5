#pragma once

#include <string>
#include <vector>

#include "gensafe/experiment.hpp"
#include "gensafe/romdp.hpp"

namespace gensafe {

/// Human-readable dump of a serialized ROMDP: shapes, invariant checks
/// (PASS/FAIL per check, naming offending pairs 1-based), count totals,
/// share of pairs at the default cost, the cost table, the highest-cost
/// reduced states and the value function when present.
std::string romdp_report(const LoadedRomdp& loaded, int top_states = 5);

/// Reads a metrics file; throws SchemaMismatch on a missing or unknown
/// schema line or an unexpected header.
std::vector<EpochMetrics> read_metrics(const std::string& path);

/// Per-epoch mean and population std across runs.
struct CurvePoint {
  int epoch = 0;
  int runs = 0;
  double reward_mean = 0.0, reward_std = 0.0;
  double cost_mean = 0.0, cost_std = 0.0;
  double violations_mean = 0.0, violations_std = 0.0;
  double lambda_mean = 0.0, lambda_std = 0.0;
};

/// Aggregates epoch-aligned runs; epochs beyond the shortest run are
/// dropped.
std::vector<CurvePoint> aggregate_curves(const std::vector<std::vector<EpochMetrics>>& runs);

std::string format_curves(const std::vector<CurvePoint>& curves);

}  // namespace gensafe
