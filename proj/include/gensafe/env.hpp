#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gensafe/common.hpp"

namespace gensafe {

/// One observed timestep (s, a, s', r, c).
struct DataSample {
  Vector state;
  Vector action;
  Vector next_state;
  double reward = 0.0;
  double cost = 0.0;
};

/// Bounded FIFO of samples; inserting past capacity evicts the oldest.
class Dataset {
 public:
  explicit Dataset(std::size_t capacity = static_cast<std::size_t>(-1));

  void push(DataSample sample);
  void clear() { samples_.clear(); }

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  std::size_t capacity() const { return capacity_; }
  const DataSample& operator[](std::size_t i) const { return samples_[i]; }

  auto begin() const { return samples_.begin(); }
  auto end() const { return samples_.end(); }

 private:
  std::size_t capacity_;
  std::deque<DataSample> samples_;
};

struct Interval {
  double lo = -1.0;
  double hi = 1.0;
  double width() const { return hi - lo; }
};

using Vec2 = std::array<double, 2>;

/// Physical state of the point mass plus the episode's goal and step count.
struct PointState {
  Vec2 pos{0.0, 0.0};
  Vec2 vel{0.0, 0.0};
  Vec2 goal{0.0, 0.0};
  int t = 0;
};

struct StepResult {
  Vector observation;
  double reward = 0.0;
  double cost = 0.0;
  bool done = false;       // episode over (terminal or time limit)
  bool truncated = false;  // ended by the time limit, not by a terminal state
  bool clamped = false;    // action was outside its bounds and got clamped
};

struct Hazard {
  Vec2 center{0.0, 0.0};
  double radius = 0.3;
};

/// Parameters shared by the in-repo environments. Fields not used by a given
/// environment are ignored.
struct EnvParams {
  std::string name = "hazard-goal";
  double dt = 0.1;
  double accel = 4.0;
  double damping = 4.0;
  double max_speed = 1.0;  // per velocity component
  double arena = 2.0;      // positions clamped to [-arena, arena]
  double discount = 0.99;
  int horizon = 0;         // 0 selects the environment default

  // hazard-goal
  int hazard_count = 8;
  double hazard_radius = 0.3;
  std::uint64_t layout_seed = 1;
  double goal_radius = 0.3;
  double goal_bonus = 1.0;
  double lidar_range = 1.5;

  // point-circle
  double circle_radius = 1.0;
  double boundary = 0.7;
};

/// Continuous-state, continuous-action CMDP over a damped double-integrator
/// point mass. Each instance is a single-threaded state machine.
class CmdpEnv {
 public:
  explicit CmdpEnv(const EnvParams& params);
  virtual ~CmdpEnv() = default;

  virtual std::string_view name() const = 0;
  virtual std::size_t state_dim() const = 0;
  std::size_t action_dim() const { return 2; }
  const std::vector<Interval>& action_bounds() const { return bounds_; }
  int horizon() const { return horizon_; }
  double discount() const { return params_.discount; }
  const EnvParams& params() const { return params_; }

  /// Samples a start state from the initial distribution; same seed, same state.
  Vector reset(std::uint64_t seed);

  /// Advances one step of length dt. Out-of-bounds actions are clamped and
  /// flagged; non-finite inputs throw NumericDomainError.
  StepResult step(std::span<const double> action);

  Vector observe() const { return observe(state_); }
  virtual Vector observe(const PointState& s) const = 0;

  const PointState& internal_state() const { return state_; }
  void set_internal_state(const PointState& s) { state_ = s; }

  /// Dynamics only: semi-implicit Euler with damping and velocity clamp.
  PointState integrate(const PointState& s, std::span<const double> action) const;

  virtual double cost(const PointState& before, const PointState& after) const = 0;
  virtual double reward(const PointState& before, const PointState& after) const = 0;
  virtual bool terminal(const PointState&) const { return false; }

 protected:
  virtual PointState sample_initial(std::mt19937_64& rng) const = 0;

  EnvParams params_;
  int horizon_ = 0;
  std::vector<Interval> bounds_;
  PointState state_;
};

/// Reward for tangential speed along a target circle; cost whenever |x|
/// exceeds the boundary. Observation: pos(2), vel(2), boundary gaps(2).
class PointCircleEnv final : public CmdpEnv {
 public:
  static constexpr int kDefaultHorizon = 400;

  explicit PointCircleEnv(const EnvParams& params);
  std::string_view name() const override { return "point-circle"; }
  std::size_t state_dim() const override { return 6; }
  Vector observe(const PointState& s) const override;
  double cost(const PointState& before, const PointState& after) const override;
  double reward(const PointState& before, const PointState& after) const override;

  /// Start positions are uniform over this square (velocity 0).
  static constexpr double kStartHalfWidth = 0.2;

 protected:
  PointState sample_initial(std::mt19937_64& rng) const override;
};

/// Reach a goal while avoiding hazard disks. Observation: pos(2), vel(2),
/// goal - pos (2), 16 lidar hazard ranges.
class HazardGoalEnv final : public CmdpEnv {
 public:
  static constexpr int kLidarBeams = 16;
  static constexpr int kDefaultHorizon = 500;
  static constexpr Interval kStartRegion{-1.9, -1.4};  // per axis
  static constexpr Interval kGoalRegion{1.4, 1.9};     // per axis

  explicit HazardGoalEnv(const EnvParams& params);
  HazardGoalEnv(const EnvParams& params, std::vector<Hazard> hazards);

  std::string_view name() const override { return "hazard-goal"; }
  std::size_t state_dim() const override { return 6 + kLidarBeams; }
  Vector observe(const PointState& s) const override;
  double cost(const PointState& before, const PointState& after) const override;
  double reward(const PointState& before, const PointState& after) const override;
  bool terminal(const PointState& s) const override;

  const std::vector<Hazard>& hazards() const { return hazards_; }
  bool in_hazard(const Vec2& p) const;

  /// Distance along the ray from `origin` at `angle` to the nearest hazard
  /// boundary, capped at the lidar range; 0 when origin is inside a hazard.
  double lidar(const Vec2& origin, double angle) const;

  static std::vector<Hazard> generate_layout(int count, double radius,
                                             std::uint64_t seed);

 protected:
  PointState sample_initial(std::mt19937_64& rng) const override;

 private:
  std::vector<Hazard> hazards_;
};

/// Builds an environment by name ("hazard-goal" or "point-circle").
std::unique_ptr<CmdpEnv> make_env(const EnvParams& params);

}  // namespace gensafe
