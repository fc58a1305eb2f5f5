#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gensafe/config.hpp"

namespace gensafe {

inline constexpr const char* kMetricsSchema = "gensafe-metrics/1";

/// One row of the per-epoch metrics file.
struct EpochMetrics {
  int epoch = 0;
  double mean_episode_reward = 0.0;
  double mean_episode_cost = 0.0;
  long violations = 0;  // steps with positive cost
  double lambda = 0.0;
  double vc_loss = 0.0;
  bool gensafe_active = false;
  long corrections = 0;
  double mean_correction_distance = 0.0;
};

/// Column header line (without the schema comment).
std::string metrics_header();
std::string format_metrics_row(const EpochMetrics& m);

struct RunResult {
  std::uint64_t seed = 0;
  std::string run_dir;
  std::vector<EpochMetrics> epochs;
};

/// Trains one seed. Writes metrics.csv, events.log, corrections.csv,
/// embedding exports and checkpoints under `out_dir/<algorithm>-seed<seed>`.
/// Progress lines go to `progress` when it is not null.
RunResult run_seed(const ExperimentConfig& config, std::uint64_t seed, const std::string& out_dir,
                   std::ostream* progress = nullptr);

struct ExperimentSummary {
  std::vector<RunResult> runs;
  std::string text;  // mean and std across seeds of the headline metrics
};

/// Runs every configured seed and writes summary-<algorithm>.txt under `out_dir`.
ExperimentSummary run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                                 std::ostream* progress = nullptr);

}  // namespace gensafe
