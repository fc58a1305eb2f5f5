#include "gensafe/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace gensafe {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw InvalidArgument("config line " + std::to_string(line) + ": " + msg);
}

bool parse_number(std::string_view s, double& out) {
  std::string clean;
  for (char c : s) {
    if (c != '_') clean.push_back(c);
  }
  if (!clean.empty() && clean[0] == '+') clean.erase(0, 1);
  const char* end = clean.data() + clean.size();
  auto [p, ec] = std::from_chars(clean.data(), end, out);
  return ec == std::errc() && p == end;
}

bool parse_string(std::string_view s, std::string& out) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') return false;
  out.assign(s.substr(1, s.size() - 2));
  return out.find('"') == std::string::npos;
}

std::vector<std::string_view> split_items(std::string_view s) {
  std::vector<std::string_view> items;
  bool quoted = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i < s.size() && s[i] == '"') quoted = !quoted;
    if (i == s.size() || (s[i] == ',' && !quoted)) {
      const auto item = trim(s.substr(start, i - start));
      if (!item.empty()) items.push_back(item);
      start = i + 1;
    }
  }
  return items;
}

ConfigValue parse_value(std::string_view v, int line) {
  if (v.empty()) fail(line, "missing value");
  if (v == "true") return true;
  if (v == "false") return false;
  std::string s;
  if (v.front() == '"') {
    if (!parse_string(v, s)) fail(line, "malformed string");
    return s;
  }
  if (v.front() == '[') {
    if (v.back() != ']') fail(line, "arrays must close on the same line");
    const auto items = split_items(v.substr(1, v.size() - 2));
    if (!items.empty() && items.front().front() == '"') {
      std::vector<std::string> out;
      for (auto it : items) {
        if (!parse_string(it, s)) fail(line, "mixed or malformed string array");
        out.push_back(s);
      }
      return out;
    }
    std::vector<double> out;
    for (auto it : items) {
      double d = 0.0;
      if (!parse_number(it, d)) fail(line, "malformed number in array");
      out.push_back(d);
    }
    return out;
  }
  double d = 0.0;
  if (!parse_number(v, d)) fail(line, "cannot parse value '" + std::string(v) + "'");
  return d;
}

}  // namespace

std::map<std::string, ConfigValue> parse_key_values(std::string_view text) {
  std::map<std::string, ConfigValue> out;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) fail(line_no, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) fail(line_no, "empty key");
    const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    if (out.contains(full)) fail(line_no, "duplicate key " + full);
    out.emplace(full, parse_value(trim(line.substr(eq + 1)), line_no));
  }
  return out;
}

std::string_view algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Ppo: return "ppo";
    case Algorithm::PpoLag: return "ppo-lag";
    case Algorithm::PpoLagGensafe: return "ppo-lag-gensafe";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "ppo") return Algorithm::Ppo;
  if (name == "ppo-lag") return Algorithm::PpoLag;
  if (name == "ppo-lag-gensafe") return Algorithm::PpoLagGensafe;
  throw InvalidArgument("unknown algorithm '" + std::string(name) + "'");
}

double ExperimentConfig::immediate_threshold(int episode_horizon) const {
  if (safety.d_s) return *safety.d_s;
  const int h = safety.cost_horizon > 0 ? safety.cost_horizon : episode_horizon;
  return safety.d / static_cast<double>(h);
}

namespace {

double as_number(const std::string& key, const ConfigValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  throw InvalidArgument(key + " must be a number");
}

long long as_integer(const std::string& key, const ConfigValue& v) {
  const double d = as_number(key, v);
  if (std::floor(d) != d || std::abs(d) > 9e15) throw InvalidArgument(key + " must be an integer");
  return static_cast<long long>(d);
}

}  // namespace

ExperimentConfig config_from_key_values(const std::map<std::string, ConfigValue>& kv) {
  ExperimentConfig c;
  using Setter = std::function<void(const std::string&, const ConfigValue&)>;
  auto num = [](double& field) -> Setter {
    return [&field](const std::string& k, const ConfigValue& v) { field = as_number(k, v); };
  };
  auto integer = [](int& field) -> Setter {
    return [&field](const std::string& k, const ConfigValue& v) { field = static_cast<int>(as_integer(k, v)); };
  };
  auto size = [](std::size_t& field) -> Setter {
    return [&field](const std::string& k, const ConfigValue& v) {
      const auto n = as_integer(k, v);
      if (n < 0) throw InvalidArgument(k + " must be non-negative");
      field = static_cast<std::size_t>(n);
    };
  };
  auto flag = [](bool& field) -> Setter {
    return [&field](const std::string& k, const ConfigValue& v) {
      const auto* b = std::get_if<bool>(&v);
      if (!b) throw InvalidArgument(k + " must be true or false");
      field = *b;
    };
  };
  auto ints = [](std::vector<int>& field) -> Setter {
    return [&field](const std::string& k, const ConfigValue& v) {
      const auto* a = std::get_if<std::vector<double>>(&v);
      if (!a) throw InvalidArgument(k + " must be an array of integers");
      field.clear();
      for (double d : *a) field.push_back(static_cast<int>(as_integer(k, d)));
    };
  };

  auto& e = c.env;
  auto& r = c.romdp;
  auto& s = c.safety;
  auto& l = c.srl;
  const std::map<std::string, Setter> setters{
      {"experiment.algorithm",
       [&](const std::string& k, const ConfigValue& v) {
         const auto* str = std::get_if<std::string>(&v);
         if (!str) throw InvalidArgument(k + " must be a string");
         c.algorithm = parse_algorithm(*str);
       }},
      {"experiment.seeds",
       [&](const std::string& k, const ConfigValue& v) {
         const auto* a = std::get_if<std::vector<double>>(&v);
         if (!a) throw InvalidArgument(k + " must be an array of integers");
         c.seeds.clear();
         for (double d : *a) {
           const auto n = as_integer(k, d);
           if (n < 0) throw InvalidArgument(k + " must be non-negative");
           c.seeds.push_back(static_cast<std::uint64_t>(n));
         }
       }},
      {"experiment.epochs", integer(c.epochs)},
      {"experiment.steps_per_epoch", integer(c.steps_per_epoch)},
      {"experiment.checkpoint_interval", integer(c.checkpoint_interval)},
      {"experiment.log_corrections", flag(c.log_corrections)},
      {"experiment.export_embedding", flag(c.export_embedding)},

      {"env.name",
       [&](const std::string& k, const ConfigValue& v) {
         const auto* str = std::get_if<std::string>(&v);
         if (!str) throw InvalidArgument(k + " must be a string");
         e.name = *str;
       }},
      {"env.dt", num(e.dt)},
      {"env.accel", num(e.accel)},
      {"env.damping", num(e.damping)},
      {"env.max_speed", num(e.max_speed)},
      {"env.arena", num(e.arena)},
      {"env.discount", num(e.discount)},
      {"env.horizon", integer(e.horizon)},
      {"env.hazard_count", integer(e.hazard_count)},
      {"env.hazard_radius", num(e.hazard_radius)},
      {"env.layout_seed",
       [&](const std::string& k, const ConfigValue& v) {
         const auto n = as_integer(k, v);
         if (n < 0) throw InvalidArgument(k + " must be non-negative");
         e.layout_seed = static_cast<std::uint64_t>(n);
       }},
      {"env.goal_radius", num(e.goal_radius)},
      {"env.goal_bonus", num(e.goal_bonus)},
      {"env.lidar_range", num(e.lidar_range)},
      {"env.circle_radius", num(e.circle_radius)},
      {"env.boundary", num(e.boundary)},

      {"romdp.k_s", integer(r.build.num_state_clusters)},
      {"romdp.k_a", integer(r.build.cells_per_action_dim)},
      {"romdp.default_cost", num(r.build.default_cost)},
      {"romdp.min_build_size", size(r.build.min_build_size)},
      {"romdp.tsne_cap", size(r.build.tsne_cap)},
      {"romdp.dataset_capacity", size(r.dataset_capacity)},
      {"romdp.rebuild_warmup", integer(r.rebuild_warmup)},
      {"romdp.rebuild_interval", integer(r.rebuild_interval)},
      {"romdp.perplexity", num(r.build.tsne.perplexity)},
      {"romdp.tsne_iterations", integer(r.build.tsne.iterations)},
      {"romdp.tsne_learning_rate", num(r.build.tsne.learning_rate)},
      {"romdp.mapper_hidden", ints(r.build.mapper.hidden)},
      {"romdp.mapper_epochs", integer(r.build.mapper.epochs)},
      {"romdp.mapper_learning_rate", num(r.build.mapper.learning_rate)},
      {"romdp.mapper_batch_size", integer(r.build.mapper.batch_size)},
      {"romdp.gmm_max_iterations", integer(r.build.gmm.max_iterations)},
      {"romdp.gmm_tolerance", num(r.build.gmm.tolerance)},

      {"safety.d", num(s.d)},
      {"safety.d_s",
       [&](const std::string& k, const ConfigValue& v) { s.d_s = as_number(k, v); }},
      {"safety.cost_horizon", integer(s.cost_horizon)},
      {"safety.deactivate_threshold", num(s.deactivate_threshold)},
      {"safety.reactivate_threshold", num(s.reactivate_threshold)},
      {"safety.vi_tolerance", num(s.vi_tolerance)},
      {"safety.vi_max_iterations", integer(s.vi_max_iterations)},
      {"safety.force_inactive", flag(s.force_inactive)},

      {"pso.particles", integer(s.pso.particles)},
      {"pso.iterations", integer(s.pso.iterations)},
      {"pso.inertia", num(s.pso.inertia)},
      {"pso.cognitive", num(s.pso.cognitive)},
      {"pso.social", num(s.pso.social)},
      {"pso.velocity_clamp", num(s.pso.velocity_clamp)},
      {"pso.penalty", num(s.pso.penalty)},

      {"srl.gamma", num(l.gamma)},
      {"srl.gae_lambda", num(l.gae_lambda)},
      {"srl.clip", num(l.clip)},
      {"srl.policy_lr", num(l.policy_lr)},
      {"srl.value_lr", num(l.value_lr)},
      {"srl.lagrange_lr", num(l.lagrange_lr)},
      {"srl.lagrange_init", num(l.lagrange_init)},
      {"srl.update_iterations", integer(l.update_iterations)},
      {"srl.minibatch_size", size(l.minibatch_size)},
      {"srl.hidden", ints(l.hidden)},
      {"srl.init_log_std", num(l.init_log_std)},
  };

  for (const auto& [key, value] : kv) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw InvalidArgument("unknown config key " + key);
    it->second(key, value);
  }
  // The discount is shared by the environment, the tables and the learner
  // unless set separately for the learner.
  if (kv.contains("env.discount") && !kv.contains("srl.gamma")) l.gamma = e.discount;
  r.build.discount = l.gamma;
  validate(c);
  return c;
}

ExperimentConfig parse_config(std::string_view text) {
  return config_from_key_values(parse_key_values(text));
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open config " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

void validate(ExperimentConfig& c) {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be positive");
  };
  if (c.seeds.empty()) throw InvalidArgument("at least one seed is required");
  positive(c.epochs, "epochs");
  positive(c.steps_per_epoch, "steps_per_epoch");
  positive(c.env.dt, "env.dt");
  positive(c.env.max_speed, "env.max_speed");
  positive(c.env.arena, "env.arena");
  if (!(c.srl.gamma >= 0.0 && c.srl.gamma < 1.0)) throw InvalidArgument("discount must lie in [0, 1)");
  if (c.srl.gae_lambda < 0.0 || c.srl.gae_lambda > 1.0) throw InvalidArgument("gae_lambda must lie in [0, 1]");
  positive(c.srl.clip, "srl.clip");
  positive(c.srl.policy_lr, "srl.policy_lr");
  positive(c.srl.value_lr, "srl.value_lr");
  if (c.srl.lagrange_lr < 0.0) throw InvalidArgument("srl.lagrange_lr must be non-negative");
  if (c.srl.lagrange_init < 0.0) throw InvalidArgument("srl.lagrange_init must be non-negative");
  positive(c.srl.update_iterations, "srl.update_iterations");
  positive(static_cast<double>(c.srl.minibatch_size), "srl.minibatch_size");
  for (int h : c.srl.hidden) positive(h, "srl.hidden");

  const auto& b = c.romdp.build;
  positive(b.num_state_clusters, "romdp.k_s");
  positive(b.cells_per_action_dim, "romdp.k_a");
  if (!(b.default_cost >= 0.0)) throw InvalidArgument("romdp.default_cost must be non-negative");
  positive(static_cast<double>(b.tsne_cap), "romdp.tsne_cap");
  positive(static_cast<double>(c.romdp.dataset_capacity), "romdp.dataset_capacity");
  if (b.min_build_size > c.romdp.dataset_capacity) {
    throw InvalidArgument("romdp.min_build_size exceeds the dataset capacity");
  }
  if (static_cast<double>(b.tsne_cap) < 4.0 * b.tsne.perplexity) {
    throw InvalidArgument("romdp.tsne_cap must be at least four times the perplexity");
  }
  if (c.romdp.rebuild_warmup < 0 || c.romdp.rebuild_interval < 0) {
    throw InvalidArgument("rebuild schedule must be non-negative");
  }

  auto& s = c.safety;
  positive(s.d, "safety.d");
  if (s.d_s) positive(*s.d_s, "safety.d_s");
  if (s.cost_horizon < 0) throw InvalidArgument("safety.cost_horizon must be non-negative");
  if (!(s.reactivate_threshold > s.deactivate_threshold)) {
    throw InvalidArgument("safety.reactivate_threshold must exceed safety.deactivate_threshold");
  }
  positive(s.vi_tolerance, "safety.vi_tolerance");
  positive(s.vi_max_iterations, "safety.vi_max_iterations");
  positive(s.pso.particles, "pso.particles");
  if (s.pso.iterations < 0) throw InvalidArgument("pso.iterations must be non-negative");
  positive(s.pso.velocity_clamp, "pso.velocity_clamp");

  c.warnings.clear();
  const int horizon = make_env(c.env)->horizon();
  const double ds = c.immediate_threshold(horizon);
  if (!(ds < b.default_cost)) {
    c.warnings.push_back("immediate threshold d_s = " + std::to_string(ds) +
                         " is not below the default cost " + std::to_string(b.default_cost));
  }
}

}  // namespace gensafe
