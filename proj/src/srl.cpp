#include "gensafe/srl.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace gensafe {

void RolloutBuffer::add(Vector state, Vector action, double log_density, double reward, double cost,
                        Vector next_state, bool terminal_step, bool segment_end_step) {
  states.push_back(std::move(state));
  actions.push_back(std::move(action));
  next_states.push_back(std::move(next_state));
  log_densities.push_back(log_density);
  rewards.push_back(reward);
  costs.push_back(cost);
  terminal.push_back(terminal_step ? 1 : 0);
  segment_end.push_back(segment_end_step || terminal_step ? 1 : 0);
}

void RolloutBuffer::clear() { *this = RolloutBuffer{}; }

void RolloutBuffer::validate() const {
  const std::size_t n = states.size();
  if (actions.size() != n || next_states.size() != n || log_densities.size() != n ||
      rewards.size() != n || costs.size() != n || terminal.size() != n || segment_end.size() != n) {
    throw InvalidArgument("rollout buffer sequences differ in length");
  }
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const double> next_values, std::span<const std::uint8_t> segment_end,
                      double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || next_values.size() != n || segment_end.size() != n) {
    throw InvalidArgument("advantage inputs differ in length");
  }
  GaeResult out{Vector(n), Vector(n)};
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    if (segment_end[i]) next_adv = 0.0;
    const double delta = rewards[i] + gamma * next_values[i] - values[i];
    next_adv = delta + gamma * lambda * next_adv;
    out.advantages[i] = next_adv;
    out.targets[i] = next_adv + values[i];
  }
  return out;
}

namespace {

Eigen::MatrixXd stack(const std::vector<Vector>& rows, std::span<const std::size_t> idx) {
  const std::size_t n = idx.empty() ? rows.size() : idx.size();
  if (n == 0) return {};
  const auto dim = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd m(dim, static_cast<Eigen::Index>(n));
  for (std::size_t c = 0; c < n; ++c) {
    const Vector& r = rows[idx.empty() ? c : idx[c]];
    m.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(r.data(), dim);
  }
  return m;
}

}  // namespace

ValueEstimates evaluate_values(const RolloutBuffer& b, const Mlp& net) {
  b.validate();
  const std::size_t n = b.size();
  ValueEstimates out{Vector(n, 0.0), Vector(n, 0.0)};
  if (n == 0) return out;
  const Eigen::MatrixXd v = net.forward(stack(b.states, {}));
  for (std::size_t i = 0; i < n; ++i) out.values[i] = v(0, static_cast<Eigen::Index>(i));
  std::vector<std::size_t> boot;
  for (std::size_t i = 0; i < n; ++i) {
    if (b.terminal[i]) continue;
    if (b.segment_end[i]) boot.push_back(i);
    else out.next_values[i] = out.values[i + 1];
  }
  if (!boot.empty()) {
    const Eigen::MatrixXd nv = net.forward(stack(b.next_states, boot));
    for (std::size_t k = 0; k < boot.size(); ++k) out.next_values[boot[k]] = nv(0, static_cast<Eigen::Index>(k));
  }
  return out;
}

void prepare_advantages(RolloutBuffer& b, const Mlp& reward_value, const Mlp* cost_value,
                        double gamma, double lambda) {
  const auto rv = evaluate_values(b, reward_value);
  auto r = compute_gae(b.rewards, rv.values, rv.next_values, b.segment_end, gamma, lambda);
  b.reward_targets = r.targets;
  const double n = static_cast<double>(b.size());
  if (b.size() > 0) {
    const double mean = std::accumulate(r.advantages.begin(), r.advantages.end(), 0.0) / n;
    double var = 0.0;
    for (double a : r.advantages) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / n);
    for (double& a : r.advantages) a = (a - mean) / (sd + 1e-8);
  }
  b.reward_advantages = std::move(r.advantages);
  if (cost_value) {
    const auto cv = evaluate_values(b, *cost_value);
    auto c = compute_gae(b.costs, cv.values, cv.next_values, b.segment_end, gamma, lambda);
    b.cost_advantages = std::move(c.advantages);
    b.cost_targets = std::move(c.targets);
  } else {
    b.cost_advantages.assign(b.size(), 0.0);
    b.cost_targets.assign(b.size(), 0.0);
  }
}

double clipped_surrogate(std::span<const double> ratios, std::span<const double> adv, double clip) {
  if (ratios.size() != adv.size()) throw InvalidArgument("ratio and advantage counts differ");
  if (ratios.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double r = ratios[i];
    s += std::min(r * adv[i], std::clamp(r, 1.0 - clip, 1.0 + clip) * adv[i]);
  }
  return s / static_cast<double>(ratios.size());
}

PpoObjectives ppo_objectives(const RolloutBuffer& b, const GaussianPolicy& policy, double clip,
                             double lambda, std::span<const std::size_t> indices) {
  b.validate();
  if (b.reward_advantages.size() != b.size() || b.cost_advantages.size() != b.size()) {
    throw InvalidArgument("advantages have not been computed");
  }
  const std::size_t n = indices.empty() ? b.size() : indices.size();
  const Mlp& net = policy.mean_net();
  PpoObjectives out;
  out.mean_gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.num_parameters()));
  out.log_std_gradient = Eigen::VectorXd::Zero(policy.log_std().size());
  if (n == 0) return out;

  ForwardCache cache;
  const Eigen::MatrixXd mu = net.forward(stack(b.states, indices), cache);
  const Eigen::MatrixXd act = stack(b.actions, indices);
  const Eigen::VectorXd log_std = policy.log_std();
  const Eigen::ArrayXd inv_var = (-2.0 * log_std.array()).exp();
  const double log_norm = -log_std.sum() - 0.5 * static_cast<double>(log_std.size()) * std::log(2.0 * std::numbers::pi);

  Eigen::MatrixXd dmu = Eigen::MatrixXd::Zero(mu.rows(), mu.cols());
  std::vector<double> coef(n, 0.0);
  double jr = 0.0, jc = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t i = indices.empty() ? c : indices[c];
    const auto col = static_cast<Eigen::Index>(c);
    const Eigen::ArrayXd diff = (act.col(col) - mu.col(col)).array();
    const double logp = log_norm - 0.5 * (diff.square() * inv_var).sum();
    const double ratio = std::exp(logp - b.log_densities[i]);
    if (!std::isfinite(ratio)) {
      ++out.skipped;
      continue;
    }
    ++out.used;
    const double cr = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
    // d/dratio of min(r A, clip(r) A): A on the unclipped branch, else 0.
    auto term = [&](double a, double& j) {
      const double u = ratio * a, k = cr * a;
      j += std::min(u, k);
      return u <= k ? a : 0.0;
    };
    const double gr = term(b.reward_advantages[i], jr);
    const double gc = term(b.cost_advantages[i], jc);
    coef[c] = (gr - lambda * gc) * ratio;
    if (coef[c] != 0.0) {
      dmu.col(col) = (coef[c] * diff * inv_var).matrix();
      out.log_std_gradient.array() += coef[c] * (diff.square() * inv_var - 1.0);
    }
  }
  if (out.used == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(out.used);
  out.reward_objective = jr * inv_n;
  out.cost_objective = jc * inv_n;
  out.mean_gradient = net.backward(cache, dmu) * inv_n;
  out.log_std_gradient *= inv_n;
  return out;
}

void update_lagrange(LagrangeState& s, double mean_episode_cost) {
  if (!std::isfinite(mean_episode_cost)) throw NumericDomainError("episode cost must be finite");
  s.lambda = std::max(0.0, s.lambda + s.learning_rate * (mean_episode_cost - s.cost_limit));
}

PpoAgent PpoAgent::create(int state_dim, int action_dim, const SrlConfig& cfg, bool with_cost_value,
                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PpoAgent a;
  a.policy = GaussianPolicy::create(state_dim, action_dim, cfg.hidden, cfg.init_log_std, rng);
  std::vector<int> sizes{state_dim};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(1);
  a.reward_value = Mlp::create(sizes, Activation::Tanh, Activation::Identity, rng);
  if (with_cost_value) a.cost_value = Mlp::create(sizes, Activation::Tanh, Activation::Identity, rng);
  a.policy_opt = AdamState(static_cast<Eigen::Index>(a.policy.mean_net().num_parameters()));
  a.log_std_opt = AdamState(action_dim);
  a.reward_opt = AdamState(static_cast<Eigen::Index>(a.reward_value.num_parameters()));
  if (a.cost_value) a.cost_opt = AdamState(static_cast<Eigen::Index>(a.cost_value->num_parameters()));
  return a;
}

namespace {

// One squared-error step of a value head on a minibatch; returns the loss
// before the step.
double fit_value(Mlp& net, AdamState& opt, const Eigen::MatrixXd& x, const Vector& targets,
                 std::span<const std::size_t> idx, double lr) {
  ForwardCache cache;
  const Eigen::MatrixXd v = net.forward(x, cache);
  Eigen::MatrixXd dy(1, v.cols());
  double loss = 0.0;
  const double n = static_cast<double>(idx.size());
  for (std::size_t c = 0; c < idx.size(); ++c) {
    const double e = v(0, static_cast<Eigen::Index>(c)) - targets[idx[c]];
    loss += e * e;
    dy(0, static_cast<Eigen::Index>(c)) = 2.0 * e / n;
  }
  adam_step(net, net.backward(cache, dy), opt, lr);
  return loss / n;
}

UpdateReport ppo_update(const RolloutBuffer& b, PpoAgent& agent, double lambda, const SrlConfig& cfg,
                        std::mt19937_64& rng, bool fit_cost) {
  b.validate();
  UpdateReport rep;
  const std::size_t n = b.size();
  if (n == 0) return rep;
  const std::size_t bs = std::min(cfg.minibatch_size, n);
  const std::size_t chunks = std::max<std::size_t>(n / bs, 1);
  const int iters = cfg.update_iterations;
  const int last_pass_start = iters - static_cast<int>(std::min<std::size_t>(chunks, static_cast<std::size_t>(iters)));

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double rloss = 0.0, closs = 0.0;
  int counted = 0;
  for (int it = 0; it < iters; ++it) {
    const std::size_t chunk = static_cast<std::size_t>(it) % chunks;
    if (chunk == 0) std::shuffle(perm.begin(), perm.end(), rng);
    const std::span<const std::size_t> idx(perm.data() + chunk * bs, bs);

    const auto obj = ppo_objectives(b, agent.policy, cfg.clip, lambda, idx);
    rep.skipped += obj.skipped;
    rep.reward_objective = obj.reward_objective;
    rep.cost_objective = obj.cost_objective;
    // Ascent on the objective is descent on its negation.
    adam_step(agent.policy.mean_net(), -obj.mean_gradient, agent.policy_opt, cfg.policy_lr);
    Eigen::VectorXd ls = agent.policy.log_std();
    adam_step(ls, -obj.log_std_gradient, agent.log_std_opt, cfg.policy_lr);
    agent.policy.set_log_std(ls);

    const Eigen::MatrixXd x = stack(b.states, idx);
    const double rl = fit_value(agent.reward_value, agent.reward_opt, x, b.reward_targets, idx, cfg.value_lr);
    double cl = 0.0;
    if (fit_cost && agent.cost_value) {
      cl = fit_value(*agent.cost_value, agent.cost_opt, x, b.cost_targets, idx, cfg.value_lr);
    }
    if (it >= last_pass_start) {
      rloss += rl;
      closs += cl;
      ++counted;
    }
  }
  rep.reward_value_loss = counted ? rloss / counted : 0.0;
  if (fit_cost && agent.cost_value && counted) {
    const double mean = std::accumulate(b.cost_targets.begin(), b.cost_targets.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double t : b.cost_targets) var += (t - mean) * (t - mean);
    var /= static_cast<double>(n);
    rep.cost_value_loss = (closs / counted) / std::max(var, 1e-6);
  }
  rep.lambda = lambda;
  return rep;
}

}  // namespace

UpdateReport update_policy_lagrangian(const RolloutBuffer& buffer, PpoAgent& agent,
                                      LagrangeState& lagrange, const SrlConfig& cfg,
                                      double mean_episode_cost, std::mt19937_64& rng) {
  UpdateReport rep = ppo_update(buffer, agent, lagrange.lambda, cfg, rng, true);
  update_lagrange(lagrange, mean_episode_cost);
  rep.lambda = lagrange.lambda;
  return rep;
}

UpdateReport update_policy_ppo(const RolloutBuffer& buffer, PpoAgent& agent, const SrlConfig& cfg,
                               std::mt19937_64& rng) {
  return ppo_update(buffer, agent, 0.0, cfg, rng, false);
}

}  // namespace gensafe
