#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ggtvae/training.hpp"

namespace ggtvae {

// Flat JSON experiment description: model + training hyperparameters, data
// paths, seed list, output directory. Unknown keys are rejected.
struct ExperimentConfig {
  std::string nodes_path;
  std::string edges_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  double val_frac = 0.05;
  double test_frac = 0.10;
  ModelConfig model;
  TrainConfig train;  // per-run seed is taken from `seeds`

  static ExperimentConfig from_json_file(const std::string& path);
  void validate() const;
};

struct ExperimentResult {
  std::vector<RunResult> runs;
  AggregateResult agg;
};

// Trains every seed (own split, record, checkpoint, split file), then
// aggregates by re-parsing the per-seed record files. jobs > 1 fans seeds out
// to forked worker processes; results are identical either way.
ExperimentResult run_experiment(const ExperimentConfig& cfg, int jobs = 1,
                                bool use_pe_cache = false);

// Subcommand bodies; return process exit codes (0 ok, 2 validation error,
// 3 training failure). Human output on stdout, diagnostics on stderr.
int cmd_split(const std::string& nodes, const std::string& edges,
              double val_frac, double test_frac, std::uint64_t seed,
              const std::string& out);
int cmd_train(const std::string& config_path,
              const std::string& out_dir_override, int jobs,
              bool use_pe_cache);
// eval_subsample in (0, 1]: fraction of the held-out positives scored
// (matched negatives kept balanced); 1.0 scores everything.
int cmd_eval(const std::string& checkpoint_path, const std::string& split_path,
             const std::string& nodes, const std::string& edges,
             const std::string& which, double eval_subsample = 1.0);
int cmd_analyze(const std::string& checkpoint_path, const std::string& nodes,
                const std::string& edges, const std::string& split_path,
                const std::string& out_dir, bool exclude_self);

}  // namespace ggtvae
