#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gensafe/action_grid.hpp"
#include "gensafe/dimred.hpp"
#include "gensafe/env.hpp"
#include "gensafe/gmm.hpp"

namespace gensafe {

/// A data sample after state and action abstraction. Indices are 0-based.
struct ReducedSample {
  int state = 0;
  int action = 0;
  int next_state = 0;
  double cost = 0.0;
};

/// Mean observed cost per (reduced state, reduced action); `default_cost`
/// where a pair was never observed.
struct CostTable {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> cost;              // [s * A + a]
  std::vector<std::int64_t> pair_counts; // n_{s,a}
};

/// Empirical transition frequencies; uniform 1/S rows for unobserved pairs.
struct TransitionTable {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> prob;               // [(s * A + a) * S + s']
  std::vector<std::int64_t> path_counts;  // n_{s x a -> s'}
};

/// Empirical action frequencies of the latest epoch; uniform rows for
/// states not visited in it.
struct PolicyTable {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> prob;               // [s * A + a]
  std::vector<std::int64_t> pair_counts;  // n^e_{s,a}
};

CostTable build_cost_table(std::span<const ReducedSample> data, int num_states,
                           int num_actions, double default_cost);
TransitionTable build_transition_table(std::span<const ReducedSample> data,
                                       int num_states, int num_actions);
PolicyTable build_policy_table(std::span<const ReducedSample> epoch_data,
                               int num_states, int num_actions);

/// The tabular part of the reduced-order MDP.
struct RomdpTables {
  int num_states = 0;
  int num_actions = 0;
  double default_cost = 0.5;
  double discount = 0.99;
  std::int64_t dataset_size = 0;
  CostTable cost;
  TransitionTable transition;
  PolicyTable policy;

  double c(int s, int a) const { return cost.cost[idx(s, a)]; }
  double t(int s, int a, int s2) const {
    return transition.prob[idx(s, a) * static_cast<std::size_t>(num_states) + static_cast<std::size_t>(s2)];
  }
  double pi(int s, int a) const { return policy.prob[idx(s, a)]; }
  std::int64_t n(int s, int a) const { return cost.pair_counts[idx(s, a)]; }

 private:
  std::size_t idx(int s, int a) const {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions) + static_cast<std::size_t>(a);
  }
};

RomdpTables assemble_tables(std::span<const ReducedSample> data,
                            std::span<const ReducedSample> epoch_data, int num_states,
                            int num_actions, double default_cost, double discount);

/// One line per violated invariant (row sums, count consistency, default
/// rule, non-negativity); empty when the tables are consistent.
std::vector<std::string> check_invariants(const RomdpTables& tables);

/// f_s = classify(mapper(normalize(s))).
class StateAbstraction {
 public:
  StateAbstraction() = default;
  StateAbstraction(Normalizer normalizer, MapperNet mapper, GmmClassifier gmm);

  int reduce(std::span<const double> state) const;
  Point2 embed(std::span<const double> state) const;
  /// Reduces many states in batches.
  std::vector<int> reduce_all(std::span<const Vector* const> states) const;

  const Normalizer& normalizer() const { return normalizer_; }
  const MapperNet& mapper() const { return mapper_; }
  const GmmClassifier& gmm() const { return gmm_; }

 private:
  Normalizer normalizer_;
  MapperNet mapper_;
  GmmClassifier gmm_;
};

struct RomdpBuildOptions {
  int num_state_clusters = 50;  // k_s
  int cells_per_action_dim = 3; // k_a
  double default_cost = 0.5;    // Delta
  double discount = 0.99;
  std::size_t min_build_size = 2000;
  std::size_t tsne_cap = 5000;
  TsneOptions tsne;
  MapperOptions mapper;
  GmmOptions gmm;
};

/// Build by-products kept for logging and export; not serialized.
struct RomdpDiagnostics {
  std::size_t tsne_points = 0;
  double final_kl = 0.0;
  double mapper_train_mse = 0.0;
  std::optional<double> mapper_heldout_mse;
  int gmm_iterations = 0;
  std::vector<Point2> embedding;
  std::vector<double> embedding_costs;
};

struct RomdpModel {
  RomdpTables tables;
  std::optional<StateAbstraction> state_abstraction;
  ActionGrid action_grid;
  RomdpDiagnostics diagnostics;

  int abstract_state(std::span<const double> state) const;
  int abstract_action(std::span<const double> action) const { return action_grid.index(action); }
};

/// Full pipeline: subsample, normalize, t-SNE, mapper, GMM, action grid,
/// cost/transition/policy tables. Errors are rethrown as StageError.
RomdpModel build_romdp(const Dataset& all, const Dataset& epoch,
                       const std::vector<Interval>& action_bounds,
                       const RomdpBuildOptions& options, std::uint64_t seed);

// Versioned JSON persistence ("gensafe-romdp", version 1).
inline constexpr int kRomdpFormatVersion = 1;
void save_romdp(const std::string& path, const RomdpModel& model,
                std::span<const double> values = {});

struct LoadedRomdp {
  RomdpModel model;
  Vector values;  // empty when the file carries no value function
};
LoadedRomdp load_romdp(const std::string& path);

}  // namespace gensafe
