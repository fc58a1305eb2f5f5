#include "gensafe/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "gensafe/planner.hpp"
#include "gensafe/safety.hpp"
#include "gensafe/srl.hpp"

namespace gensafe {

namespace fs = std::filesystem;

namespace {

// Independent RNG streams of one run.
enum Stream : std::uint64_t {
  kInitStream = 0,
  kPolicyStream = 1,
  kEnvStream = 2,
  kUpdateStream = 3,
  kBuildStream = 4,
  kPsoStream = 5,
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw Error("cannot write " + p.string());
  return os;
}

bool rebuild_due(const RomdpSettings& r, int epoch) {
  if (epoch <= r.rebuild_warmup) return true;
  return r.rebuild_interval > 0 && (epoch - r.rebuild_warmup) % r.rebuild_interval == 0;
}

template <typename F>
auto in_stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

// The reduced model with everything a correction needs.
struct SafetyModel {
  RomdpModel model;
  ReducedValueFunction values;
  ConstraintTable constraints;
};

}  // namespace

std::string metrics_header() {
  return "epoch,mean_episode_reward,mean_episode_cost,violations,lambda,vc_loss,gensafe_active,"
         "corrections,mean_correction_distance";
}

std::string format_metrics_row(const EpochMetrics& m) {
  std::ostringstream os;
  os << m.epoch << ',' << fmt(m.mean_episode_reward) << ',' << fmt(m.mean_episode_cost) << ','
     << m.violations << ',' << fmt(m.lambda) << ',' << fmt(m.vc_loss) << ',' << (m.gensafe_active ? 1 : 0)
     << ',' << m.corrections << ',' << fmt(m.mean_correction_distance);
  return os.str();
}

RunResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& out_dir,
                   std::ostream* progress) {
  RunResult result;
  result.seed = seed;
  const fs::path dir = fs::path(out_dir) / (std::string(algorithm_name(cfg.algorithm)) + "-seed" + std::to_string(seed));
  fs::create_directories(dir / "checkpoints");
  if (cfg.export_embedding) fs::create_directories(dir / "embedding");
  result.run_dir = dir.string();

  auto metrics = open_out(dir / "metrics.csv");
  metrics << "# schema: " << kMetricsSchema << '\n' << metrics_header() << '\n';
  auto events = open_out(dir / "events.log");
  std::ofstream corrections_log;
  const bool gensafe = cfg.algorithm == Algorithm::PpoLagGensafe;
  const bool lagrangian = cfg.algorithm != Algorithm::Ppo;
  if (gensafe && cfg.log_corrections) {
    corrections_log = open_out(dir / "corrections.csv");
    corrections_log << "epoch,timestep,feasible,distance,immediate,future\n";
  }

  auto env = in_stage("environment", [&] { return make_env(cfg.env); });
  const int state_dim = static_cast<int>(env->state_dim());
  const int action_dim = static_cast<int>(env->action_dim());
  const double d_s = cfg.immediate_threshold(env->horizon());

  PpoAgent agent = PpoAgent::create(state_dim, action_dim, cfg.srl, lagrangian, derive_seed(seed, kInitStream));
  LagrangeState lagrange{cfg.srl.lagrange_init, cfg.srl.lagrange_lr, cfg.safety.d};
  std::mt19937_64 policy_rng(derive_seed(seed, kPolicyStream));
  std::mt19937_64 update_rng(derive_seed(seed, kUpdateStream));

  Dataset all(cfg.romdp.dataset_capacity);
  Dataset epoch_data;
  std::optional<SafetyModel> safety;
  ActivationState activation;
  activation.deactivate_threshold = cfg.safety.deactivate_threshold;
  activation.reactivate_threshold = cfg.safety.reactivate_threshold;
  activation.active = !cfg.safety.force_inactive;

  std::uint64_t episode_index = 0;
  long global_step = 0;
  RolloutBuffer buffer;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // ---- collect
    buffer.clear();
    EpochMetrics m;
    m.epoch = epoch;
    std::vector<double> ep_rewards, ep_costs;
    double ep_r = 0.0, ep_c = 0.0;
    double correction_distance = 0.0;
    const bool correcting = gensafe && safety && activation.active;
    m.gensafe_active = correcting;
    Vector obs = env->reset(derive_seed(seed, kEnvStream, episode_index++));
    in_stage("collect", [&] {
      for (int t = 0; t < cfg.steps_per_epoch; ++t, ++global_step) {
        PolicySample ps = policy_sample(agent.policy, obs, policy_rng);
        // The learner sees the correction as part of the environment: it
        // keeps its own sample, the datasets keep the applied action.
        Vector action = ps.action;
        if (correcting) {
          const auto problem = make_correction_problem(safety->model, safety->constraints, obs, ps.action, d_s,
                                                       cfg.safety.d);
          const auto fix = correct_action(problem, cfg.safety.pso,
                                          derive_seed(seed, kPsoStream, static_cast<std::uint64_t>(global_step)));
          if (corrections_log.is_open()) {
            corrections_log << epoch << ',' << global_step << ',' << (fix.feasible ? 1 : 0) << ','
                            << fmt(fix.distance) << ',' << fmt(fix.immediate) << ',' << fmt(fix.future) << '\n';
          }
          if (!fix.short_circuit) {
            ++m.corrections;
            correction_distance += fix.distance;
            action = fix.action;
          }
        }
        const StepResult sr = env->step(action);
        if (sr.cost > 0.0) ++m.violations;
        ep_r += sr.reward;
        ep_c += sr.cost;
        const bool last = t + 1 == cfg.steps_per_epoch;
        const bool terminal = sr.done && !sr.truncated;
        manage_dataset(all, epoch_data, {obs, action, sr.observation, sr.reward, sr.cost});
        buffer.add(obs, ps.action, ps.log_density, sr.reward, sr.cost, sr.observation, terminal, sr.done || last);
        if (sr.done) {
          ep_rewards.push_back(ep_r);
          ep_costs.push_back(ep_c);
          ep_r = ep_c = 0.0;
          if (!last) obs = env->reset(derive_seed(seed, kEnvStream, episode_index++));
        } else {
          obs = sr.observation;
        }
      }
    });
    if (ep_rewards.empty()) {
      ep_rewards.push_back(ep_r);
      ep_costs.push_back(ep_c);
    }
    m.mean_episode_reward = mean_of(ep_rewards);
    m.mean_episode_cost = mean_of(ep_costs);
    m.mean_correction_distance = m.corrections ? correction_distance / static_cast<double>(m.corrections) : 0.0;
    events << "epoch " << epoch << " collect steps=" << buffer.size() << " episodes=" << ep_rewards.size()
           << " violations=" << m.violations << " corrections=" << m.corrections << '\n';

    // ---- build
    if (gensafe && rebuild_due(cfg.romdp, epoch) && all.size() >= cfg.romdp.build.min_build_size) {
      if (all.size() > all.capacity()) throw StageError("build", "dataset capacity exceeded");
      SafetyModel sm;
      sm.model = build_romdp(all, epoch_data, env->action_bounds(), cfg.romdp.build,
                             derive_seed(seed, kBuildStream, static_cast<std::uint64_t>(epoch)));
      if (sm.model.diagnostics.tsne_points > cfg.romdp.build.tsne_cap) {
        throw StageError("build", "t-SNE subsample cap exceeded");
      }
      sm.values = in_stage("value-iteration", [&] {
        return value_iteration(sm.model.tables, cfg.safety.vi_tolerance, cfg.safety.vi_max_iterations);
      });
      sm.constraints = build_constraint_table(sm.model.tables, sm.values.values, sm.model.tables.discount);
      if (cfg.export_embedding) {
        auto os = open_out(dir / "embedding" / ("epoch_" + std::to_string(epoch) + ".csv"));
        os << "x,y,cost,cluster\n";
        const auto& gmm = sm.model.state_abstraction->gmm();
        const auto& d = sm.model.diagnostics;
        for (std::size_t i = 0; i < d.embedding.size(); ++i) {
          os << fmt(d.embedding[i][0]) << ',' << fmt(d.embedding[i][1]) << ',' << fmt(d.embedding_costs[i]) << ','
             << gmm.classify(d.embedding[i]) << '\n';
        }
      }
      events << "epoch " << epoch << " build samples=" << all.size() << " tsne_points=" << sm.model.diagnostics.tsne_points
             << " kl=" << fmt(sm.model.diagnostics.final_kl) << " mapper_mse=" << fmt(sm.model.diagnostics.mapper_train_mse)
             << " vi_sweeps=" << sm.values.iterations_run << '\n';
      safety = std::move(sm);
    }

    // ---- update
    UpdateReport rep = in_stage("update", [&] {
      prepare_advantages(buffer, agent.reward_value, agent.cost_value ? &*agent.cost_value : nullptr,
                         cfg.srl.gamma, cfg.srl.gae_lambda);
      if (lagrangian) {
        return update_policy_lagrangian(buffer, agent, lagrange, cfg.srl, m.mean_episode_cost, update_rng);
      }
      return update_policy_ppo(buffer, agent, cfg.srl, update_rng);
    });
    m.lambda = rep.lambda;
    m.vc_loss = rep.cost_value_loss;
    events << "epoch " << epoch << " update lambda=" << fmt(rep.lambda) << " vc_loss=" << fmt(rep.cost_value_loss)
           << " skipped=" << rep.skipped << '\n';

    // ---- activation check
    if (gensafe && !cfg.safety.force_inactive) {
      const bool before = activation.active;
      activation = update_activation(activation, rep.cost_value_loss);
      events << "epoch " << epoch << " activation " << (activation.active ? "active" : "inactive")
             << (before != activation.active ? " (changed)" : "") << '\n';
    }

    // ---- clear the epoch dataset
    end_epoch(epoch_data);
    events << "epoch " << epoch << " clear\n";

    metrics << format_metrics_row(m) << '\n';
    metrics.flush();
    events.flush();
    result.epochs.push_back(m);

    if (cfg.checkpoint_interval > 0 && epoch % cfg.checkpoint_interval == 0) {
      auto os = open_out(dir / "checkpoints" / ("policy_epoch" + std::to_string(epoch) + ".bin"));
      write_checkpoint(os, agent.policy);
    }
    if (progress) {
      *progress << algorithm_name(cfg.algorithm) << " seed " << seed << " epoch " << epoch << ": reward "
                << fmt(m.mean_episode_reward) << " cost " << fmt(m.mean_episode_cost) << " violations "
                << m.violations << " lambda " << fmt(m.lambda) << " corrections " << m.corrections << std::endl;
    }
  }

  {
    auto os = std::ofstream(dir / "checkpoints" / "policy_final.bin", std::ios::binary);
    write_checkpoint(os, agent.policy);
  }
  if (safety) save_romdp((dir / "romdp_final.json").string(), safety->model, safety->values.values);
  return result;
}

ExperimentSummary run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                                 std::ostream* progress) {
  ExperimentSummary s;
  for (std::uint64_t seed : cfg.seeds) s.runs.push_back(run_seed(cfg, seed, out_dir, progress));

  std::vector<double> final_reward, violations, cost;
  for (const auto& r : s.runs) {
    const std::size_t n = r.epochs.size();
    const std::size_t tail = std::min<std::size_t>(5, n);
    double fr = 0.0, v = 0.0, c = 0.0;
    for (std::size_t i = n - tail; i < n; ++i) fr += r.epochs[i].mean_episode_reward;
    for (const auto& e : r.epochs) {
      v += static_cast<double>(e.violations);
      c += e.mean_episode_cost;
    }
    final_reward.push_back(fr / static_cast<double>(tail));
    violations.push_back(v / static_cast<double>(n));
    cost.push_back(c / static_cast<double>(n));
  }
  std::ostringstream os;
  os << "algorithm " << algorithm_name(cfg.algorithm) << ", " << s.runs.size() << " seed(s), " << cfg.epochs
     << " epochs\n";
  os << "final-5-epoch reward: " << fmt(mean_of(final_reward)) << " +- " << fmt(population_std(final_reward)) << '\n';
  os << "episode cost: " << fmt(mean_of(cost)) << " +- " << fmt(population_std(cost)) << '\n';
  os << "violations per epoch: " << fmt(mean_of(violations)) << " +- " << fmt(population_std(violations)) << '\n';
  s.text = os.str();
  fs::create_directories(out_dir);
  auto f = open_out(fs::path(out_dir) / ("summary-" + std::string(algorithm_name(cfg.algorithm)) + ".txt"));
  f << s.text;
  return s;
}

}  // namespace gensafe
