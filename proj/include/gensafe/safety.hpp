#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gensafe/action_grid.hpp"
#include "gensafe/env.hpp"
#include "gensafe/planner.hpp"
#include "gensafe/romdp.hpp"

namespace gensafe {

/// Constraint left-hand sides for every (reduced state, reduced action):
/// immediate = C(s,a), future = C(s,a) + gamma sum_s' T(s,a,s') V(s').
struct ConstraintTable {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> immediate;  // [s * A + a]
  std::vector<double> future;
};

ConstraintTable build_constraint_table(const RomdpTables& tables, std::span<const double> values,
                                       double discount);

/// Find the action closest to `proposed` whose cell satisfies
/// immediate <= d_s and future <= d in the given reduced state.
struct CorrectionProblem {
  const ActionGrid* grid = nullptr;
  const ConstraintTable* constraints = nullptr;
  int reduced_state = 0;
  Vector proposed;
  double d_s = 0.0;
  double d = 0.0;
};

/// Abstracts `state` with the model and packages a problem.
CorrectionProblem make_correction_problem(const RomdpModel& model, const ConstraintTable& constraints,
                                          std::span<const double> state,
                                          std::span<const double> proposed, double d_s, double d);

struct ConstraintValues {
  double immediate = 0.0;
  double future = 0.0;
  bool feasible = false;
};

ConstraintValues constraint_eval(const CorrectionProblem& problem, std::span<const double> action);

/// Penalized objective of the infeasible fallback:
/// |a - a_t|^2 + rho * (max(0, imm - d_s) + max(0, fut - d)).
double penalized_objective(const CorrectionProblem& problem, std::span<const double> action,
                           double rho);

struct PsoConfig {
  int particles = 40;
  int iterations = 60;
  double inertia = 0.7;
  double cognitive = 1.5;
  double social = 1.5;
  double velocity_clamp = 0.5;  // fraction of the bound width
  double penalty = 1e3;         // rho
};

struct CorrectionResult {
  Vector action;
  bool feasible = false;
  bool short_circuit = false;  // the proposal was already feasible
  double immediate = 0.0;
  double future = 0.0;
  double distance = 0.0;       // |a_m - a_t|
  double objective = 0.0;      // distance^2, plus the penalty when infeasible
  /// Global-best swarm fitness after initialization and after every
  /// iteration (empty on short-circuit).
  std::vector<double> best_history;
};

/// PSO over the action box, seeded with one particle per grid cell, followed
/// by projection of the proposal onto every cell the swarm visited; the
/// fittest projection is returned. A feasible proposal (after clamping to
/// the bounds) is returned unchanged without running the swarm.
CorrectionResult correct_action(const CorrectionProblem& problem, const PsoConfig& config,
                                std::uint64_t seed);

// --------------------------------------------------------------- dataset

/// Appends to the long-term FIFO dataset and to the epoch dataset.
void manage_dataset(Dataset& all, Dataset& epoch, DataSample sample);
/// Epoch end: clears the epoch dataset only.
void end_epoch(Dataset& epoch);

// ------------------------------------------------------------ activation

struct ActivationState {
  bool active = true;
  double deactivate_threshold = 0.05;  // delta_d
  double reactivate_threshold = 0.15;  // delta_r
  std::optional<double> last_loss;
};

/// active and loss < delta_d: deactivate; inactive and loss > delta_r:
/// reactivate; otherwise unchanged.
ActivationState update_activation(const ActivationState& state, double vc_loss);

}  // namespace gensafe
