// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Usage: acceptance [--only 1,2,...] [--config hazard_goal.toml] [--work-dir DIR]

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "gensafe/config.hpp"
#include "gensafe/dimred.hpp"
#include "gensafe/experiment.hpp"
#include "gensafe/planner.hpp"
#include "gensafe/romdp.hpp"
#include "gensafe/safety.hpp"
#include "gensafe/srl.hpp"
#include "oracles.hpp"

using namespace gensafe;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ------------------------------------------------------------------ 1

Outcome worked_example_exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  for (double delta : {0.5, 0.123, 7.0}) {
    const auto ex = oracle::worked_example(delta);
    const auto c = build_cost_table(ex.samples, 3, 2, delta);
    const auto t = build_transition_table(ex.samples, 3, 2);
    const auto p = build_policy_table(ex.samples, 3, 2);
    const std::vector<double> cost{(0.25 + 0.75) / 2.0, delta, 1.0, 0.0, delta, 0.375};
    const double third = 1.0 / 3.0;
    const std::vector<double> trans{0.5,   0.5,   0.0,   third, third, third, 0.0, 1.0, 0.0,
                                    0.0,   0.0,   1.0,   third, third, third, 1.0, 0.0, 0.0};
    const std::vector<double> pol{1.0, 0.0, 0.5, 0.5, 0.0, 1.0};
    ok = ok && c.cost == cost && t.prob == trans && p.prob == pol;
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 1.0, "tables bit-exact for three default costs, " + fmt("%.3f s", secs)};
}

// ------------------------------------------------------------------ 2

Outcome value_iteration_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> ks(1, 20), ka(1, 9), count(20, 600);
  const double delta = 1e-8;
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int S = ks(rng), A = ka(rng);
    const double gamma = rep % 2 == 0 ? 0.9 : 0.99;
    const auto data = oracle::random_reduced_samples(rng, count(rng), S, A);
    const auto epoch = oracle::random_reduced_samples(rng, count(rng) / 3 + 1, S, A);
    const RomdpTables t = assemble_tables(data, epoch, S, A, 0.5, gamma);
    const auto v = value_iteration(t, delta, 1000000);
    const Vector exact = oracle::linear_solve_values(t);
    for (int s = 0; s < S; ++s) worst = std::max(worst, std::abs(v.values[static_cast<std::size_t>(s)] - exact[static_cast<std::size_t>(s)]));
  }
  const double secs = seconds_since(t0);
  return {worst <= 10 * delta && secs < 10.0,
          "max |V - V_linear| = " + fmt("%.3g", worst) + " (bound 1e-07), " + fmt("%.2f s", secs)};
}

// ------------------------------------------------------------------ 3

Outcome action_correction_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0), wide(-1.4, 1.4);
  const ActionGrid grid({{-1.0, 1.0}, {-1.0, 1.0}}, 3);
  const PsoConfig pso;
  int flag_mismatch = 0, above = 0, below = 0, infeasible_cases = 0;
  double worst_above = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    ConstraintTable table{1, 9, std::vector<double>(9), std::vector<double>(9)};
    // A quarter of the problems have no feasible cell at all.
    const bool none = rep % 4 == 3;
    for (int a = 0; a < 9; ++a) {
      table.immediate[static_cast<std::size_t>(a)] = none ? 0.6 + u(rng) : u(rng);
      table.future[static_cast<std::size_t>(a)] = 20.0 * u(rng);
    }
    const CorrectionProblem p{&grid, &table, 0, {wide(rng), wide(rng)}, 0.5, 10.0};
    const auto r = correct_action(p, pso, static_cast<std::uint64_t>(1000 + rep));
    const auto g = oracle::dense_grid_search(p, 200, pso.penalty);
    if (!g.feasible) ++infeasible_cases;
    if (r.feasible != g.feasible) ++flag_mismatch;
    // The lattice only over-estimates the optimum, so the library may come in
    // below the grid value by up to the lattice slack but never above it by
    // more than the tolerance.
    if (r.objective > g.objective + 1e-3) {
      ++above;
      worst_above = std::max(worst_above, r.objective - g.objective);
    }
    if (r.objective < g.objective - oracle::grid_slack(p, 200, g.objective) - 1e-12) ++below;
  }
  const double secs = seconds_since(t0);
  return {flag_mismatch == 0 && above == 0 && below == 0 && secs < 30.0,
          std::to_string(flag_mismatch) + " flag mismatches, " + std::to_string(above) +
              " above grid + 1e-3 (worst " + fmt("%.3g", worst_above) + "), " + std::to_string(below) +
              " below the lattice bound, " + std::to_string(infeasible_cases) + " infeasible problems, " +
              fmt("%.2f s", secs)};
}

// ------------------------------------------------------------------ 4

Outcome table_builder_properties() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> ks(1, 50), ka(1, 27);
  int mismatches = 0;
  double worst_row = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const int S = ks(rng), A = ka(rng);
    const double delta = 0.1 + 0.8 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto data = oracle::random_reduced_samples(rng, 1000, S, A);
    const std::span<const ReducedSample> epoch(data.data() + 600, 400);
    const auto ref = oracle::group_by_tables(data, epoch, S, A, delta);
    const auto c = build_cost_table(data, S, A, delta);
    const auto t = build_transition_table(data, S, A);
    const auto p = build_policy_table(epoch, S, A);
    if (c.cost != ref.cost || c.pair_counts != ref.n || t.prob != ref.transition || p.prob != ref.policy) ++mismatches;
    for (int r = 0; r < S * A; ++r) {
      double ts = 0.0, ps = 0.0;
      for (int s2 = 0; s2 < S; ++s2) ts += t.prob[static_cast<std::size_t>(r * S + s2)];
      worst_row = std::max(worst_row, std::abs(ts - 1.0));
      if (r % A == 0) {
        for (int a = 0; a < A; ++a) ps += p.prob[static_cast<std::size_t>(r + a)];
        worst_row = std::max(worst_row, std::abs(ps - 1.0));
      }
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && worst_row <= 1e-12 && secs < 10.0,
          std::to_string(mismatches) + " datasets differ from the group-by oracle, worst row-sum error " +
              fmt("%.2g", worst_row) + ", " + fmt("%.2f s", secs)};
}

// ------------------------------------------------------------------ 5

Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
  return m;
}

// Mean-squared-error gradient of a regression head against finite differences.
double regression_check(const Mlp& net, std::mt19937_64& rng) {
  const Eigen::MatrixXd x = random_matrix(net.input_dim(), 6, rng);
  const Eigen::MatrixXd y = random_matrix(net.output_dim(), 6, rng);
  ForwardCache cache;
  const Eigen::MatrixXd out = net.forward(x, cache);
  const double n = static_cast<double>(x.cols());
  const Eigen::VectorXd g = net.backward(cache, 2.0 * (out - y) / n);
  Mlp probe = net;
  const Eigen::VectorXd fd = oracle::finite_difference(
      [&](const Eigen::VectorXd& p) {
        probe.set_parameters(p);
        return (probe.forward(x) - y).squaredNorm() / n;
      },
      net.parameters());
  return oracle::max_relative_error(g, fd);
}

// Clipped-surrogate gradient of the policy mean net; draws with a ratio on a
// clip edge are redrawn since the objective has a kink there.
double policy_check(int state_dim, int action_dim, std::uint64_t seed, std::mt19937_64& rng) {
  SrlConfig cfg;
  for (;;) {
    auto agent = PpoAgent::create(state_dim, action_dim, cfg, true, seed++);
    GaussianPolicy old = agent.policy;
    Eigen::VectorXd p = old.mean_net().parameters();
    std::normal_distribution<double> z(0.0, 0.02);
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += z(rng);
    old.mean_net().set_parameters(p);
    RolloutBuffer b;
    std::normal_distribution<double> n01(0.0, 1.0);
    for (int i = 0; i < 8; ++i) {
      Vector s(static_cast<std::size_t>(state_dim));
      for (auto& v : s) v = n01(rng);
      const auto ps = policy_sample(old, s, rng);
      b.add(s, ps.action, ps.log_density, 0.0, 0.0, s, false, i == 7);
      b.reward_advantages.push_back(n01(rng));
      b.cost_advantages.push_back(n01(rng));
    }
    bool kink = false;
    for (std::size_t i = 0; i < b.size(); ++i) {
      const double r = std::exp(agent.policy.log_density(b.states[i], b.actions[i]) - b.log_densities[i]);
      kink = kink || std::abs(r - (1 - cfg.clip)) < 1e-3 || std::abs(r - (1 + cfg.clip)) < 1e-3;
    }
    if (kink) continue;
    const double lambda = 0.5;
    const auto o = ppo_objectives(b, agent.policy, cfg.clip, lambda);
    // Clipped objective written out directly from the Gaussian log-density.
    Eigen::MatrixXd states(state_dim, static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < b.size(); ++i) {
      for (int d = 0; d < state_dim; ++d) states(d, static_cast<Eigen::Index>(i)) = b.states[i][static_cast<std::size_t>(d)];
    }
    const Eigen::VectorXd log_std = agent.policy.log_std();
    Mlp probe = agent.policy.mean_net();
    auto clipped = [&](double ratio, double adv) {
      return std::min(ratio * adv, std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv);
    };
    const Eigen::VectorXd fd = oracle::finite_difference(
        [&](const Eigen::VectorXd& q) {
          probe.set_parameters(q);
          const Eigen::MatrixXd mu = probe.forward(states);
          double jr = 0.0, jc = 0.0;
          for (std::size_t i = 0; i < b.size(); ++i) {
            double logp = 0.0;
            for (int d = 0; d < action_dim; ++d) {
              const double z = (b.actions[i][static_cast<std::size_t>(d)] - mu(d, static_cast<Eigen::Index>(i))) / std::exp(log_std[d]);
              logp += -0.5 * z * z - log_std[d] - 0.5 * std::log(2.0 * std::numbers::pi);
            }
            const double ratio = std::exp(logp - b.log_densities[i]);
            jr += clipped(ratio, b.reward_advantages[i]);
            jc += clipped(ratio, b.cost_advantages[i]);
          }
          return (jr - lambda * jc) / static_cast<double>(b.size());
        },
        agent.policy.mean_net().parameters(), 1e-6);
    return oracle::max_relative_error(o.mean_gradient, fd);
  }
}

Outcome gradient_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(5);
  const SrlConfig srl;
  const MapperOptions mapper;
  std::ostringstream detail;
  bool ok = true;
  for (int state_dim : {22, 6}) {
    std::vector<int> value_sizes{state_dim};
    value_sizes.insert(value_sizes.end(), srl.hidden.begin(), srl.hidden.end());
    value_sizes.push_back(1);
    std::vector<int> mapper_sizes{state_dim};
    mapper_sizes.insert(mapper_sizes.end(), mapper.hidden.begin(), mapper.hidden.end());
    mapper_sizes.push_back(2);
    double w_policy = 0.0, w_value = 0.0, w_mapper = 0.0;
    for (int k = 0; k < 10; ++k) {
      w_policy = std::max(w_policy, policy_check(state_dim, 2, 100 * k + 1, rng));
      w_value = std::max(w_value, regression_check(Mlp::create(value_sizes, Activation::Tanh, Activation::Identity, rng), rng));
      w_mapper = std::max(w_mapper, regression_check(Mlp::create(mapper_sizes, Activation::Tanh, Activation::Identity, rng), rng));
    }
    ok = ok && w_policy < 1e-4 && w_value < 1e-4 && w_mapper < 1e-4;
    detail << "state dim " << state_dim << ": policy " << fmt("%.2g", w_policy) << ", value " << fmt("%.2g", w_value)
           << ", mapper " << fmt("%.2g", w_mapper) << "; ";
  }
  const double secs = seconds_since(t0);
  detail << fmt("%.1f s", secs);
  return {ok && secs < 30.0, detail.str()};
}

// ------------------------------------------------------------------ 6

Outcome gae_oracle() {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> len(1, 64);
  std::uniform_real_distribution<double> gl(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  std::bernoulli_distribution done(0.1);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = static_cast<std::size_t>(len(rng));
    Vector r(n), v(n), nv(n);
    std::vector<std::uint8_t> seg(n);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = z(rng);
      v[i] = z(rng);
      nv[i] = done(rng) ? 0.0 : z(rng);
      seg[i] = (done(rng) || i + 1 == n) ? 1 : 0;
    }
    const double gamma = 0.9 + 0.1 * gl(rng), lambda = gl(rng);
    const auto g = compute_gae(r, v, nv, seg, gamma, lambda);
    const auto ref = oracle::gae_by_sum(r, v, nv, seg, gamma, lambda);
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(g.advantages[i] - ref[i]));
  }
  return {worst <= 1e-10, "max |A - A_ref| = " + fmt("%.3g", worst)};
}

// ------------------------------------------------------------------ 7

Outcome tsne_contract() {
  const auto blobs = oracle::gaussian_blobs(3, 200, 22, 10.0, 7);
  const TsneOptions opt;
  const auto aff = compute_affinities(blobs.points, opt.perplexity);
  double worst_h = 0.0;
  for (std::size_t i = 0; i < aff.n; ++i) {
    const double h = oracle::conditional_entropy_bits(blobs.points, i, aff.precision[i]);
    worst_h = std::max(worst_h, std::abs(h - std::log2(opt.perplexity)));
  }
  double asym = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < aff.n; ++i) {
    for (std::size_t j = 0; j < aff.n; ++j) {
      asym = std::max(asym, std::abs(aff.joint[i * aff.n + j] - aff.joint[j * aff.n + i]));
      sum += aff.joint[i * aff.n + j];
    }
  }
  const auto t0 = std::chrono::steady_clock::now();
  const Embedding e = tsne(blobs.points, opt, 17);
  const double secs = seconds_since(t0);
  const double trust = oracle::trustworthiness(blobs.points, e.points, 10);
  const bool ok = worst_h <= 1e-3 && asym == 0.0 && std::abs(sum - 1.0) <= 1e-12 && trust >= 0.9 && secs < 60.0;
  return {ok, "entropy error " + fmt("%.2g", worst_h) + " bits, asymmetry " + fmt("%.2g", asym) + ", |sum - 1| " +
                  fmt("%.2g", std::abs(sum - 1.0)) + ", trustworthiness " + fmt("%.4f", trust) + ", t-SNE " +
                  fmt("%.1f s", secs) + " at n = 600"};
}

// ------------------------------------------------------------------ 8

const char* kTransparencyConfig = R"(
[experiment]
seeds = [1, 2, 3]
epochs = 3
steps_per_epoch = 2000
checkpoint_interval = 0
log_corrections = true
export_embedding = false

[env]
name = "hazard-goal"

[romdp]
k_s = 10
min_build_size = 500
tsne_cap = 300
tsne_iterations = 200
mapper_epochs = 20

[safety]
force_inactive = true
)";

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome wrapper_transparency(const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = parse_config(kTransparencyConfig);
  const fs::path dir = work / "transparency";
  fs::remove_all(dir);
  int identical = 0;
  for (std::uint64_t seed : cfg.seeds) {
    cfg.algorithm = Algorithm::PpoLag;
    const RunResult base = run_seed(cfg, seed, dir.string());
    cfg.algorithm = Algorithm::PpoLagGensafe;
    const RunResult wrapped = run_seed(cfg, seed, dir.string());
    const std::string a = slurp(fs::path(base.run_dir) / "metrics.csv");
    const std::string b = slurp(fs::path(wrapped.run_dir) / "metrics.csv");
    if (!a.empty() && a == b) ++identical;
  }
  const double secs = seconds_since(t0);
  return {identical == static_cast<int>(cfg.seeds.size()) && secs < 600.0,
          std::to_string(identical) + " of " + std::to_string(cfg.seeds.size()) +
              " seeds byte-identical, " + fmt("%.1f s", secs)};
}

// ------------------------------------------------------------------ 9

struct Headline {
  double violations = 0.0;  // mean per epoch over all epochs and seeds
  double final_reward = 0.0;
};

Headline headline(const ExperimentSummary& s) {
  Headline h;
  for (const auto& run : s.runs) {
    double v = 0.0, r = 0.0;
    for (const auto& e : run.epochs) v += static_cast<double>(e.violations);
    const std::size_t n = run.epochs.size(), tail = std::min<std::size_t>(5, n);
    for (std::size_t i = n - tail; i < n; ++i) r += run.epochs[i].mean_episode_reward;
    h.violations += v / static_cast<double>(n);
    h.final_reward += r / static_cast<double>(tail);
  }
  h.violations /= static_cast<double>(s.runs.size());
  h.final_reward /= static_cast<double>(s.runs.size());
  return h;
}

Outcome directional_safety(const std::string& config_path, const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = load_config(config_path);
  const fs::path dir = work / "directional";
  fs::remove_all(dir);
  cfg.algorithm = Algorithm::PpoLag;
  const Headline base = headline(run_experiment(cfg, dir.string()));
  cfg.algorithm = Algorithm::PpoLagGensafe;
  const Headline safe = headline(run_experiment(cfg, dir.string()));
  const double reduction = 1.0 - safe.violations / base.violations;
  const double reward_share = safe.final_reward / base.final_reward;
  const bool ok = base.violations > 0.0 && reduction >= 0.25 && base.final_reward > 0.0 && reward_share >= 0.6;
  return {ok, "violations/epoch " + fmt("%.1f", safe.violations) + " vs " + fmt("%.1f", base.violations) + " (" +
                  fmt("%.1f%%", 100.0 * reduction) + " fewer), final-5 reward " + fmt("%.3f", safe.final_reward) +
                  " vs " + fmt("%.3f", base.final_reward) + " (" + fmt("%.1f%%", 100.0 * reward_share) + "), " +
                  fmt("%.0f s", seconds_since(t0))};
}

// ------------------------------------------------------------------ 10

Outcome activation_hysteresis() {
  const std::vector<double> losses{0.4, 0.2, 0.16, 0.04, 0.06, 0.14, 0.1, 0.149, 0.051, 0.12, 0.08, 0.15, 0.05};
  ActivationState s;
  int deactivations = 0, reactivations = 0;
  for (double l : losses) {
    const ActivationState next = update_activation(s, l);
    if (s.active && !next.active) ++deactivations;
    if (!s.active && next.active) ++reactivations;
    s = next;
  }
  return {deactivations == 1 && reactivations == 0 && !s.active,
          std::to_string(deactivations) + " deactivation(s), " + std::to_string(reactivations) + " reactivation(s)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  std::string config_path = GENSAFE_ACCEPTANCE_CONFIG;
  std::string work_dir = (fs::temp_directory_path() / "gensafe_acceptance").string();
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  app.add_option("--config", config_path, "experiment config for criterion 9");
  app.add_option("--work-dir", work_dir, "scratch directory for training runs");
  CLI11_PARSE(app, argc, argv);

  const std::set<int> selected(only.begin(), only.end());
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, worked_example_exactness},
      {2, value_iteration_oracle},
      {3, action_correction_oracle},
      {4, table_builder_properties},
      {5, gradient_checks},
      {6, gae_oracle},
      {7, tsne_contract},
      {8, [&] { return wrapper_transparency(work_dir); }},
      {9, [&] { return directional_safety(config_path, work_dir); }},
      {10, activation_hysteresis},
  };
  fs::create_directories(work_dir);
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
