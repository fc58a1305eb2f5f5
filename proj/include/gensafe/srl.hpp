#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "gensafe/tinynet.hpp"

namespace gensafe {

/// Transitions of one training epoch plus the quantities derived from them.
struct RolloutBuffer {
  std::vector<Vector> states;
  std::vector<Vector> actions;
  std::vector<Vector> next_states;
  Vector log_densities;
  Vector rewards;
  Vector costs;
  /// The step ended in a terminal state; its successor has value 0.
  std::vector<std::uint8_t> terminal;
  /// Advantage recursion stops after this step (episode end, time limit or
  /// end of the buffer).
  std::vector<std::uint8_t> segment_end;

  Vector reward_advantages;  // normalized to zero mean, unit variance
  Vector cost_advantages;
  Vector reward_targets;
  Vector cost_targets;

  void add(Vector state, Vector action, double log_density, double reward, double cost,
           Vector next_state, bool terminal_step, bool segment_end_step);
  std::size_t size() const { return states.size(); }
  void clear();
  /// Throws InvalidArgument when the per-step sequences differ in length.
  void validate() const;
};

struct GaeResult {
  Vector advantages;
  Vector targets;  // advantages + values
};

/// delta_t = r_t + gamma * next_values_t - values_t and
/// A_t = delta_t + gamma * lambda * A_{t+1}, restarted after segment ends.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const double> next_values,
                      std::span<const std::uint8_t> segment_end, double gamma, double lambda);

/// Values of every state and of every successor; successors of terminal
/// steps get 0 and, inside a segment, next_values[t] = values[t + 1].
struct ValueEstimates {
  Vector values;
  Vector next_values;
};
ValueEstimates evaluate_values(const RolloutBuffer& buffer, const Mlp& value_net);

/// Fills advantages and targets for both streams. Reward advantages are then
/// normalized; cost advantages keep their scale. Without a cost net the cost
/// advantages and targets are zero.
void prepare_advantages(RolloutBuffer& buffer, const Mlp& reward_value, const Mlp* cost_value,
                        double gamma, double lambda);

/// mean_i min(r_i A_i, clip(r_i, 1 - eps, 1 + eps) A_i)
double clipped_surrogate(std::span<const double> ratios, std::span<const double> advantages,
                         double clip);

struct PpoObjectives {
  double reward_objective = 0.0;  // J_R
  double cost_objective = 0.0;    // J_C
  /// Gradient of J_R - lambda J_C with respect to the mean-net parameters
  /// and the log-std vector.
  Eigen::VectorXd mean_gradient;
  Eigen::VectorXd log_std_gradient;
  int skipped = 0;  // samples dropped for a non-finite ratio
  int used = 0;
};

/// Evaluates the clipped objectives over `indices` of the buffer (all
/// samples when empty).
PpoObjectives ppo_objectives(const RolloutBuffer& buffer, const GaussianPolicy& policy,
                             double clip, double lambda, std::span<const std::size_t> indices = {});

struct LagrangeState {
  double lambda = 0.0;
  double learning_rate = 0.05;
  double cost_limit = 0.0;  // d
};

/// lambda <- max(0, lambda + lr (episode_cost - d)).
void update_lagrange(LagrangeState& state, double mean_episode_cost);

struct SrlConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double policy_lr = 3e-4;
  double value_lr = 1e-3;
  double lagrange_lr = 0.05;
  double lagrange_init = 0.0;
  int update_iterations = 40;
  std::size_t minibatch_size = 2000;
  std::vector<int> hidden{64, 64};
  double init_log_std = -0.5;
};

/// Policy, value heads and their optimizer states.
struct PpoAgent {
  GaussianPolicy policy;
  Mlp reward_value;
  std::optional<Mlp> cost_value;
  AdamState policy_opt;
  AdamState log_std_opt;
  AdamState reward_opt;
  AdamState cost_opt;

  static PpoAgent create(int state_dim, int action_dim, const SrlConfig& config, bool with_cost_value,
                         std::uint64_t seed);
};

struct UpdateReport {
  double reward_objective = 0.0;   // J_R on the last minibatch
  double cost_objective = 0.0;
  double reward_value_loss = 0.0;  // mean squared error, last full pass
  /// Cost value fitting loss over the last full pass, as mean squared error
  /// divided by the variance of the cost targets.
  double cost_value_loss = 0.0;
  double lambda = 0.0;
  int skipped = 0;
};

/// Minibatch updates of the policy on J_R - lambda J_C and of both value
/// heads, followed by the multiplier update with the epoch's mean episode
/// cost. Advantages must already be prepared.
UpdateReport update_policy_lagrangian(const RolloutBuffer& buffer, PpoAgent& agent,
                                      LagrangeState& lagrange, const SrlConfig& config,
                                      double mean_episode_cost, std::mt19937_64& rng);

/// Same with lambda fixed at 0 and no cost value head.
UpdateReport update_policy_ppo(const RolloutBuffer& buffer, PpoAgent& agent,
                               const SrlConfig& config, std::mt19937_64& rng);

}  // namespace gensafe
