#include "gensafe/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gensafe {

Dataset::Dataset(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw InvalidArgument("dataset capacity must be positive");
}

void Dataset::push(DataSample sample) {
  if (sample.cost < 0.0) throw InvalidArgument("sample cost must be non-negative");
  samples_.push_back(std::move(sample));
  while (samples_.size() > capacity_) samples_.pop_front();
}

CmdpEnv::CmdpEnv(const EnvParams& params) : params_(params) {
  if (!(params.discount > 0.0 && params.discount < 1.0)) {
    throw InvalidArgument("discount must lie in (0, 1)");
  }
  if (!(params.dt > 0.0)) throw InvalidArgument("dt must be positive");
  bounds_ = {Interval{-1.0, 1.0}, Interval{-1.0, 1.0}};
}

Vector CmdpEnv::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  state_ = sample_initial(rng);
  return observe(state_);
}

PointState CmdpEnv::integrate(const PointState& s,
                              std::span<const double> action) const {
  PointState next = s;
  for (int d = 0; d < 2; ++d) {
    double v = s.vel[d] + params_.dt * (params_.accel * action[d] -
                                        params_.damping * s.vel[d]);
    v = std::clamp(v, -params_.max_speed, params_.max_speed);
    double x = s.pos[d] + params_.dt * v;
    if (x > params_.arena || x < -params_.arena) {
      x = std::clamp(x, -params_.arena, params_.arena);
      v = 0.0;
    }
    next.pos[d] = x;
    next.vel[d] = v;
  }
  next.t = s.t + 1;
  return next;
}

StepResult CmdpEnv::step(std::span<const double> action) {
  if (action.size() != action_dim()) {
    throw InvalidArgument("action has wrong dimension");
  }
  require_finite(action, "action");
  const std::array<double, 6> raw{state_.pos[0],  state_.pos[1],  state_.vel[0],
                                  state_.vel[1],  state_.goal[0], state_.goal[1]};
  require_finite(raw, "state");

  StepResult out;
  std::array<double, 2> a{};
  for (std::size_t d = 0; d < 2; ++d) {
    a[d] = std::clamp(action[d], bounds_[d].lo, bounds_[d].hi);
    if (a[d] != action[d]) out.clamped = true;
  }
  const PointState before = state_;
  state_ = integrate(before, a);
  out.reward = reward(before, state_);
  out.cost = cost(before, state_);
  const bool term = terminal(state_);
  out.truncated = !term && state_.t >= horizon_;
  out.done = term || out.truncated;
  out.observation = observe(state_);
  return out;
}

// ---------------------------------------------------------------- point-circle

PointCircleEnv::PointCircleEnv(const EnvParams& params) : CmdpEnv(params) {
  horizon_ = params.horizon > 0 ? params.horizon : kDefaultHorizon;
}

PointState PointCircleEnv::sample_initial(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(-kStartHalfWidth, kStartHalfWidth);
  PointState s;
  s.pos = {u(rng), u(rng)};
  return s;
}

Vector PointCircleEnv::observe(const PointState& s) const {
  const double b = params_.boundary;
  return {s.pos[0], s.pos[1], s.vel[0], s.vel[1], b - s.pos[0], b + s.pos[0]};
}

double PointCircleEnv::cost(const PointState& before,
                            const PointState& after) const {
  const double b = params_.boundary;
  return (std::abs(before.pos[0]) > b || std::abs(after.pos[0]) > b) ? 1.0 : 0.0;
}

double PointCircleEnv::reward(const PointState&, const PointState& after) const {
  const double x = after.pos[0], y = after.pos[1];
  const double r = std::hypot(x, y);
  if (r < 1e-9) return 0.0;
  const double tangential = (-y * after.vel[0] + x * after.vel[1]) / r;
  return tangential / (1.0 + std::abs(r - params_.circle_radius));
}

// ----------------------------------------------------------------- hazard-goal

HazardGoalEnv::HazardGoalEnv(const EnvParams& params)
    : HazardGoalEnv(params, generate_layout(params.hazard_count,
                                            params.hazard_radius,
                                            params.layout_seed)) {}

HazardGoalEnv::HazardGoalEnv(const EnvParams& params, std::vector<Hazard> hazards)
    : CmdpEnv(params), hazards_(std::move(hazards)) {
  horizon_ = params.horizon > 0 ? params.horizon : kDefaultHorizon;
}

std::vector<Hazard> HazardGoalEnv::generate_layout(int count, double radius,
                                                   std::uint64_t seed) {
  if (count < 0) throw InvalidArgument("hazard count must be non-negative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Hazard> out;
  const double min_sep = 2.0 * radius + 0.1;
  int attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    Vec2 c{u(rng), u(rng)};
    const bool clear = std::all_of(out.begin(), out.end(), [&](const Hazard& h) {
      return std::hypot(h.center[0] - c[0], h.center[1] - c[1]) >= min_sep;
    });
    // Fall back to accepting overlaps if the band is too crowded.
    if (clear || ++attempts > 10000) out.push_back({c, radius});
  }
  return out;
}

PointState HazardGoalEnv::sample_initial(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> start(kStartRegion.lo, kStartRegion.hi);
  std::uniform_real_distribution<double> goal(kGoalRegion.lo, kGoalRegion.hi);
  PointState s;
  s.pos = {start(rng), start(rng)};
  s.goal = {goal(rng), goal(rng)};
  return s;
}

bool HazardGoalEnv::in_hazard(const Vec2& p) const {
  return std::any_of(hazards_.begin(), hazards_.end(), [&](const Hazard& h) {
    return std::hypot(p[0] - h.center[0], p[1] - h.center[1]) <= h.radius;
  });
}

double HazardGoalEnv::lidar(const Vec2& origin, double angle) const {
  const double ux = std::cos(angle), uy = std::sin(angle);
  double best = params_.lidar_range;
  for (const Hazard& h : hazards_) {
    const double fx = origin[0] - h.center[0], fy = origin[1] - h.center[1];
    const double c = fx * fx + fy * fy - h.radius * h.radius;
    if (c <= 0.0) return 0.0;
    const double b = fx * ux + fy * uy;
    const double disc = b * b - c;
    if (disc < 0.0) continue;
    const double t = -b - std::sqrt(disc);
    if (t >= 0.0) best = std::min(best, t);
  }
  return best;
}

Vector HazardGoalEnv::observe(const PointState& s) const {
  Vector obs;
  obs.reserve(state_dim());
  obs.insert(obs.end(), {s.pos[0], s.pos[1], s.vel[0], s.vel[1],
                         s.goal[0] - s.pos[0], s.goal[1] - s.pos[1]});
  for (int k = 0; k < kLidarBeams; ++k) {
    obs.push_back(lidar(s.pos, 2.0 * std::numbers::pi * k / kLidarBeams));
  }
  return obs;
}

double HazardGoalEnv::cost(const PointState& before, const PointState& after) const {
  return (in_hazard(before.pos) || in_hazard(after.pos)) ? 1.0 : 0.0;
}

double HazardGoalEnv::reward(const PointState& before,
                             const PointState& after) const {
  auto dist = [](const PointState& s) {
    return std::hypot(s.goal[0] - s.pos[0], s.goal[1] - s.pos[1]);
  };
  double r = dist(before) - dist(after);
  if (terminal(after)) r += params_.goal_bonus;
  return r;
}

bool HazardGoalEnv::terminal(const PointState& s) const {
  return std::hypot(s.goal[0] - s.pos[0], s.goal[1] - s.pos[1]) <= params_.goal_radius;
}

std::unique_ptr<CmdpEnv> make_env(const EnvParams& params) {
  if (params.name == "hazard-goal") return std::make_unique<HazardGoalEnv>(params);
  if (params.name == "point-circle") return std::make_unique<PointCircleEnv>(params);
  throw InvalidArgument("unknown environment '" + params.name + "'");
}

}  // namespace gensafe
