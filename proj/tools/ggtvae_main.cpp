#include <cstdint>
#include <string>

#include <CLI11.hpp>

#include "ggtvae/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Graph-transformer VAE for link prediction"};
  app.require_subcommand(1);

  std::string nodes, edges, out, config_path, out_dir, checkpoint_path;
  std::string split_path, which = "test";
  double val_frac = 0.05, test_frac = 0.10, eval_subsample = 1.0;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool use_pe_cache = false;
  bool exclude_self = false;

  auto* split = app.add_subcommand("split", "Partition edges into "
                                            "train/val/test with negatives");
  split->add_option("--nodes", nodes, "nodes.tsv path")->required();
  split->add_option("--edges", edges, "edges.tsv path")->required();
  split->add_option("--val-frac", val_frac, "validation fraction");
  split->add_option("--test-frac", test_frac, "test fraction");
  split->add_option("--seed", seed, "split seed");
  split->add_option("--out", out, "output split JSON")->required();

  auto* train = app.add_subcommand("train", "Run the multi-seed experiment "
                                            "described by a JSON config");
  train->add_option("--config", config_path, "experiment config JSON")
      ->required();
  train->add_option("--out-dir", out_dir, "output directory (overrides "
                                          "config out_dir)");
  train->add_option("--jobs", jobs, "parallel seed workers (default 1)");
  train->add_flag("--pe-cache", use_pe_cache,
                  "cache positional encodings next to the run records");

  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a stored "
                                          "split partition");
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint path")
      ->required();
  eval->add_option("--split", split_path, "split JSON path")->required();
  eval->add_option("--nodes", nodes, "nodes.tsv path")->required();
  eval->add_option("--edges", edges, "edges.tsv path")->required();
  eval->add_option("--which", which, "partition: val or test");
  eval->add_option("--eval-subsample", eval_subsample,
                   "fraction of held-out positives to score, with matched "
                   "negatives (default 1.0 = all)");

  auto* analyze = app.add_subcommand("analyze", "Export latents and the "
                                                "attention-by-distance / "
                                                "globality reports");
  analyze->add_option("--checkpoint", checkpoint_path, "checkpoint path")
      ->required();
  analyze->add_option("--nodes", nodes, "nodes.tsv path")->required();
  analyze->add_option("--edges", edges, "edges.tsv path")->required();
  analyze->add_option("--split", split_path, "split JSON path")->required();
  analyze->add_option("--out-dir", out_dir, "output directory")->required();
  analyze->add_flag("--exclude-self", exclude_self,
                    "drop the d=0 bucket from globality");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (split->parsed())
    return ggtvae::cmd_split(nodes, edges, val_frac, test_frac, seed, out);
  if (train->parsed())
    return ggtvae::cmd_train(config_path, out_dir, jobs, use_pe_cache);
  if (eval->parsed())
    return ggtvae::cmd_eval(checkpoint_path, split_path, nodes, edges, which,
                            eval_subsample);
  return ggtvae::cmd_analyze(checkpoint_path, nodes, edges, split_path,
                             out_dir, exclude_self);
}
