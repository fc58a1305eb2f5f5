#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gensafe/env.hpp"
#include "gensafe/romdp.hpp"
#include "gensafe/safety.hpp"
#include "gensafe/srl.hpp"

namespace gensafe {

// ------------------------------------------------------------ key-value file

/// Value of one `key = value` line: string, bool, number or array.
using ConfigValue = std::variant<std::string, bool, double, std::vector<double>,
                                 std::vector<std::string>>;

/// Flat sectioned key-value text (the TOML subset of `[section]` headers,
/// `#` comments, quoted strings, booleans, numbers and one-line arrays).
/// Keys are returned as "section.key".
std::map<std::string, ConfigValue> parse_key_values(std::string_view text);

// ------------------------------------------------------------ experiment

enum class Algorithm { Ppo, PpoLag, PpoLagGensafe };

std::string_view algorithm_name(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

struct RomdpSettings {
  RomdpBuildOptions build;
  int rebuild_warmup = 10;    // rebuild every epoch up to this epoch
  int rebuild_interval = 2;   // then every this many epochs; 0 never rebuilds after warm-up
  std::size_t dataset_capacity = 100000;
};

struct SafetySettings {
  double d = 10.0;                    // episode cost budget and future-cost threshold
  std::optional<double> d_s;          // immediate threshold; default d / cost horizon
  int cost_horizon = 0;               // 0 uses the episode horizon
  double deactivate_threshold = 0.05; // delta_d
  double reactivate_threshold = 0.15; // delta_r
  double vi_tolerance = 1e-4;
  int vi_max_iterations = 10000;
  bool force_inactive = false;
  PsoConfig pso;
};

struct ExperimentConfig {
  EnvParams env;
  Algorithm algorithm = Algorithm::PpoLagGensafe;
  std::vector<std::uint64_t> seeds{1};
  int epochs = 30;
  int steps_per_epoch = 20000;
  int checkpoint_interval = 10;
  bool log_corrections = true;
  bool export_embedding = true;
  RomdpSettings romdp;
  SafetySettings safety;
  SrlConfig srl;

  /// Non-fatal findings of validation (e.g. d_s not below Delta).
  std::vector<std::string> warnings;

  /// d_s as configured, or d divided by the cost horizon.
  double immediate_threshold(int episode_horizon) const;
};

/// Applies parsed keys over the defaults; unknown keys are errors.
ExperimentConfig config_from_key_values(const std::map<std::string, ConfigValue>& kv);
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Throws InvalidArgument on invalid settings and records warnings.
void validate(ExperimentConfig& config);

}  // namespace gensafe
