// Command-line entry point: train, inspect, plotdata.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "gensafe/config.hpp"
#include "gensafe/experiment.hpp"
#include "gensafe/report.hpp"

using namespace gensafe;

int main(int argc, char** argv) {
  CLI::App app{"GenSafe: ROMDP-based action correction for safe reinforcement learning"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "run an experiment from a config file");
  std::string config_path, out_dir = "runs", algo;
  std::vector<std::uint64_t> seeds;
  bool quiet = false;
  train->add_option("--config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seeds, "seed(s), overriding the config");
  train->add_option("--out-dir", out_dir, "output directory");
  train->add_option("--algo", algo, "ppo, ppo-lag or ppo-lag-gensafe, overriding the config");
  train->add_flag("--quiet", quiet, "no per-epoch progress");

  auto* inspect = app.add_subcommand("inspect", "print a report of a saved ROMDP");
  std::string model_path;
  int top = 5;
  inspect->add_option("model", model_path, "ROMDP file")->required();
  inspect->add_option("--top", top, "number of highest-cost states to list");

  auto* plot = app.add_subcommand("plotdata", "aggregate metrics files into mean/std curves");
  std::vector<std::string> metric_files;
  std::string plot_out;
  plot->add_option("metrics", metric_files, "metrics.csv files")->required();
  plot->add_option("-o,--output", plot_out, "output CSV (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      ExperimentConfig cfg = load_config(config_path);
      if (!seeds.empty()) cfg.seeds = seeds;
      if (!algo.empty()) cfg.algorithm = parse_algorithm(algo);
      for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << '\n';
      const auto summary = run_experiment(cfg, out_dir, quiet ? nullptr : &std::cerr);
      std::cout << summary.text;
    } else if (*inspect) {
      std::cout << romdp_report(load_romdp(model_path), top);
    } else if (*plot) {
      std::vector<std::vector<EpochMetrics>> runs;
      for (const auto& f : metric_files) runs.push_back(read_metrics(f));
      const std::string text = format_curves(aggregate_curves(runs));
      if (plot_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream os(plot_out);
        if (!os) throw Error("cannot write " + plot_out);
        os << text;
      }
    }
  } catch (const StageError& e) {
    std::cerr << "error in stage '" << e.stage() << "': " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
