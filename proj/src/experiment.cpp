#include "ggtvae/experiment.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>

#include <json.hpp>

#include "ggtvae/analysis.hpp"
#include "ggtvae/checkpoint.hpp"

namespace ggtvae {

namespace {

using nlohmann::json;

json config_echo(const ExperimentConfig& cfg) {
  json doc;
  doc["nodes"] = cfg.nodes_path;
  doc["edges"] = cfg.edges_path;
  doc["out_dir"] = cfg.out_dir;
  doc["seeds"] = cfg.seeds;
  doc["val_frac"] = cfg.val_frac;
  doc["test_frac"] = cfg.test_frac;
  doc["layers"] = cfg.model.layers;
  doc["heads"] = cfg.model.heads;
  doc["d_hid"] = cfg.model.d_hid;
  doc["d_z"] = cfg.model.d_z;
  doc["pe_dim"] = cfg.model.pe_dim;
  doc["ffn_mult"] = cfg.model.ffn_mult;
  doc["beta"] = cfg.train.beta;
  doc["epochs"] = cfg.train.epochs;
  doc["lr"] = cfg.train.lr;
  doc["weight_decay"] = cfg.train.weight_decay;
  doc["patience"] = cfg.train.patience;
  doc["eval_every"] = cfg.train.eval_every;
  return doc;
}

std::string seed_path(const ExperimentConfig& cfg, std::uint64_t seed,
                      const char* suffix) {
  return cfg.out_dir + "/seed_" + std::to_string(seed) + suffix;
}

void write_json_file(const json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << doc.dump() << '\n';
  if (!out) throw IoError("write failed for " + path);
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    json doc;
    in >> doc;
    return doc;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void run_one_seed(const ExperimentConfig& cfg, const Graph& g,
                  const std::string& ghash, std::uint64_t seed,
                  const json& echo, bool use_pe_cache) {
  const EdgeSplit split = split_edges(g, cfg.val_frac, cfg.test_frac, seed);
  save_split(split, seed_path(cfg, seed, ".split.json"));

  TrainConfig tcfg = cfg.train;
  tcfg.seed = seed;
  ModelParams params;
  Tensor pe;
  const std::string cache =
      use_pe_cache ? seed_path(cfg, seed, ".pe.csv") : std::string();
  const RunResult r = fit(g, split, cfg.model, tcfg, &params, &pe, cache);

  CheckpointMeta meta;
  meta.config = cfg.model;
  meta.d_node = g.d_node();
  meta.epoch = r.best_epoch;
  meta.seed = seed;
  meta.val_auc = r.val_auc;
  meta.val_ap = r.val_ap;
  meta.test_auc = r.test_auc;
  meta.test_ap = r.test_ap;
  meta.graph_hash = ghash;
  save_checkpoint(seed_path(cfg, seed, ".ckpt"), params, meta);

  json record;
  record["config"] = echo;
  record["seed"] = seed;
  record["best_epoch"] = r.best_epoch;
  record["val_auc"] = r.val_auc;
  record["val_ap"] = r.val_ap;
  record["test_auc"] = r.test_auc;
  record["test_ap"] = r.test_ap;
  json curve = json::array();
  for (const LossCurvePoint& p : r.loss_curve) {
    curve.push_back({{"epoch", p.epoch},
                     {"recon", p.recon},
                     {"kl", p.kl},
                     {"val_auc", p.val_auc}});
  }
  record["loss_curve"] = curve;
  write_json_file(record, seed_path(cfg, seed, ".json"));
}

RunResult parse_record(const json& doc) {
  RunResult r;
  r.seed = doc.at("seed").get<std::uint64_t>();
  r.best_epoch = doc.at("best_epoch").get<int>();
  r.val_auc = doc.at("val_auc").get<double>();
  r.val_ap = doc.at("val_ap").get<double>();
  r.test_auc = doc.at("test_auc").get<double>();
  r.test_ap = doc.at("test_ap").get<double>();
  for (const auto& p : doc.at("loss_curve")) {
    LossCurvePoint point;
    point.epoch = p.at("epoch").get<int>();
    point.recon = p.at("recon").get<double>();
    point.kl = p.at("kl").get<double>();
    point.val_auc = p.at("val_auc").get<double>();
    r.loss_curve.push_back(point);
  }
  return r;
}

void run_seeds_forked(const ExperimentConfig& cfg, const Graph& g,
                      const std::string& ghash, const json& echo, int jobs,
                      bool use_pe_cache) {
  // Duplicate seeds collapse to one worker (they would write the same files).
  std::vector<std::uint64_t> unique_seeds = cfg.seeds;
  std::sort(unique_seeds.begin(), unique_seeds.end());
  unique_seeds.erase(std::unique(unique_seeds.begin(), unique_seeds.end()),
                     unique_seeds.end());

  std::size_t next = 0;
  std::size_t active = 0;
  int worst = 0;
  std::fflush(nullptr);
  while (next < unique_seeds.size() || active > 0) {
    while (active < static_cast<std::size_t>(jobs) &&
           next < unique_seeds.size()) {
      const std::uint64_t seed = unique_seeds[next++];
      const pid_t pid = fork();
      if (pid < 0) throw IoError("fork failed");
      if (pid == 0) {
        int code = 0;
        try {
          run_one_seed(cfg, g, ghash, seed, echo, use_pe_cache);
        } catch (const TrainingError& e) {
          std::cerr << "seed " << seed << ": " << e.what() << '\n';
          code = 3;
        } catch (const std::exception& e) {
          std::cerr << "seed " << seed << ": " << e.what() << '\n';
          code = 2;
        }
        std::fflush(nullptr);
        _exit(code);
      }
      ++active;
    }
    int status = 0;
    if (waitpid(-1, &status, 0) < 0) throw IoError("waitpid failed");
    --active;
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : 2;
    worst = std::max(worst, code);
  }
  if (worst == 3) throw TrainingError("a seed worker aborted during training");
  if (worst != 0) throw ValueError("a seed worker failed");
}

int guard(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

struct LoadedRun {
  Checkpoint ckpt;
  Graph graph;
  EdgeSplit split;
  PositionalEncoding pe;
};

LoadedRun load_run(const std::string& checkpoint_path,
                   const std::string& nodes, const std::string& edges,
                   const std::string& split_path) {
  LoadedRun run;
  run.ckpt = load_checkpoint(checkpoint_path);
  run.graph = load_graph(nodes, edges);
  if (graph_hash(run.graph) != run.ckpt.meta.graph_hash)
    throw ValueError("graph hash mismatch: checkpoint was trained on " +
                     run.ckpt.meta.graph_hash + ", these files hash to " +
                     graph_hash(run.graph));
  run.split = load_split(split_path);
  const TrainAdjacency adj =
      TrainAdjacency::from_edges(run.graph.n, run.split.train_pos);
  run.pe = laplacian_pe(adj, run.ckpt.meta.config.pe_dim);
  return run;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  const json doc = load_json_file(path);
  if (!doc.is_object()) throw ParseError(path + ": config must be an object");
  static const std::set<std::string> known = {
      "nodes",    "edges",    "out_dir",  "seeds",        "val_frac",
      "test_frac", "layers",  "heads",    "d_hid",        "d_z",
      "pe_dim",   "ffn_mult", "beta",     "epochs",       "lr",
      "weight_decay",         "patience", "eval_every"};
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (!known.count(key))
      throw ValueError(path + ": unknown config key '" + key + "'");
  }

  ExperimentConfig cfg;
  try {
    cfg.nodes_path = doc.at("nodes").get<std::string>();
    cfg.edges_path = doc.at("edges").get<std::string>();
    cfg.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    if (doc.contains("out_dir"))
      cfg.out_dir = doc.at("out_dir").get<std::string>();
    if (doc.contains("val_frac"))
      cfg.val_frac = doc.at("val_frac").get<double>();
    if (doc.contains("test_frac"))
      cfg.test_frac = doc.at("test_frac").get<double>();
    if (doc.contains("layers")) cfg.model.layers = doc.at("layers").get<int>();
    if (doc.contains("heads")) cfg.model.heads = doc.at("heads").get<int>();
    if (doc.contains("d_hid")) cfg.model.d_hid = doc.at("d_hid").get<int>();
    if (doc.contains("d_z")) cfg.model.d_z = doc.at("d_z").get<int>();
    if (doc.contains("pe_dim")) cfg.model.pe_dim = doc.at("pe_dim").get<int>();
    if (doc.contains("ffn_mult"))
      cfg.model.ffn_mult = doc.at("ffn_mult").get<int>();
    if (doc.contains("beta")) {
      cfg.train.beta = doc.at("beta").get<double>();
      cfg.model.beta = cfg.train.beta;
    }
    if (doc.contains("epochs")) cfg.train.epochs = doc.at("epochs").get<int>();
    if (doc.contains("lr")) cfg.train.lr = doc.at("lr").get<double>();
    if (doc.contains("weight_decay"))
      cfg.train.weight_decay = doc.at("weight_decay").get<double>();
    if (doc.contains("patience"))
      cfg.train.patience = doc.at("patience").get<int>();
    if (doc.contains("eval_every"))
      cfg.train.eval_every = doc.at("eval_every").get<int>();
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return cfg;
}

void ExperimentConfig::validate() const {
  for (const std::string& p : {nodes_path, edges_path}) {
    std::ifstream probe(p);
    if (!probe) throw ValueError("config: cannot open referenced file " + p);
  }
  if (out_dir.empty())
    throw ValueError("config: no output directory (config out_dir or "
                     "--out-dir)");
  if (seeds.size() < 2)
    throw ValueError("config: need >= 2 seeds for mean/std aggregation");
  if (val_frac <= 0.0 || test_frac <= 0.0 || val_frac + test_frac >= 1.0)
    throw ValueError("config: bad val_frac/test_frac");
  model.validate();
  TrainConfig probe = train;
  probe.validate();
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, int jobs,
                                bool use_pe_cache) {
  cfg.validate();
  if (jobs < 1) throw ValueError("jobs must be >= 1");
  std::filesystem::create_directories(cfg.out_dir);

  const Graph g = load_graph(cfg.nodes_path, cfg.edges_path);
  const std::string ghash = graph_hash(g);
  const json echo = config_echo(cfg);

  if (jobs == 1) {
    std::set<std::uint64_t> done;
    for (std::uint64_t seed : cfg.seeds) {
      if (!done.insert(seed).second) continue;
      std::cerr << "training seed " << seed << "...\n";
      run_one_seed(cfg, g, ghash, seed, echo, use_pe_cache);
    }
  } else {
    run_seeds_forked(cfg, g, ghash, echo, jobs, use_pe_cache);
  }

  ExperimentResult result;
  for (std::uint64_t seed : cfg.seeds)
    result.runs.push_back(parse_record(load_json_file(
        seed_path(cfg, seed, ".json"))));
  result.agg = aggregate(result.runs);

  json agg_doc;
  agg_doc["mean_auc"] = result.agg.mean_auc;
  agg_doc["std_auc"] = result.agg.std_auc;
  agg_doc["mean_ap"] = result.agg.mean_ap;
  agg_doc["std_ap"] = result.agg.std_ap;
  agg_doc["n_seeds"] = result.agg.n_seeds;
  write_json_file(agg_doc, cfg.out_dir + "/aggregate.json");
  return result;
}

int cmd_split(const std::string& nodes, const std::string& edges,
              double val_frac, double test_frac, std::uint64_t seed,
              const std::string& out) {
  return guard([&] {
    const Graph g = load_graph(nodes, edges);
    const EdgeSplit split = split_edges(g, val_frac, test_frac, seed);
    save_split(split, out);
    std::printf("train=%zu val=%zu test=%zu\n", split.train_pos.size(),
                split.val_pos.size(), split.test_pos.size());
  });
}

int cmd_train(const std::string& config_path,
              const std::string& out_dir_override, int jobs,
              bool use_pe_cache) {
  return guard([&] {
    ExperimentConfig cfg = ExperimentConfig::from_json_file(config_path);
    if (!out_dir_override.empty()) cfg.out_dir = out_dir_override;
    const ExperimentResult result = run_experiment(cfg, jobs, use_pe_cache);
    std::printf("AUC %.2f ± %.2f / AP %.2f ± %.2f\n",
                100.0 * result.agg.mean_auc, 100.0 * result.agg.std_auc,
                100.0 * result.agg.mean_ap, 100.0 * result.agg.std_ap);
  });
}

namespace {

// keep `keep` uniformly chosen entries (partial Fisher-Yates), sorted
std::vector<Edge> subsample_edges(std::vector<Edge> edges, std::size_t keep,
                                  Rng& rng) {
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(rng.uniform_int(edges.size() - i));
    std::swap(edges[i], edges[j]);
  }
  edges.resize(keep);
  std::sort(edges.begin(), edges.end());
  return edges;
}

}  // namespace

int cmd_eval(const std::string& checkpoint_path, const std::string& split_path,
             const std::string& nodes, const std::string& edges,
             const std::string& which, double eval_subsample) {
  return guard([&] {
    if (which != "val" && which != "test")
      throw ValueError("--which must be 'val' or 'test'");
    if (!(eval_subsample > 0.0) || eval_subsample > 1.0)
      throw ValueError("--eval-subsample must be in (0, 1]");
    const LoadedRun run = load_run(checkpoint_path, nodes, edges, split_path);
    EdgeSplit split = run.split;
    if (eval_subsample < 1.0) {
      std::vector<Edge>& pos = which == "val" ? split.val_pos : split.test_pos;
      std::vector<Edge>& neg = which == "val" ? split.val_neg : split.test_neg;
      const auto keep = std::max<std::size_t>(
          1, static_cast<std::size_t>(eval_subsample *
                                      static_cast<double>(pos.size())));
      Rng rng(derive_seed(split.seed, streams::kEvalSubsample));
      pos = subsample_edges(pos, keep, rng);
      neg = subsample_edges(neg, keep, rng);
    }
    const EvalMetrics m = evaluate_split(
        run.ckpt.params, run.graph.features, run.pe.vectors, split,
        which == "val" ? SplitPart::kVal : SplitPart::kTest);
    std::printf("AUC %.4f\nAP %.4f\n", m.auc, m.ap);
  });
}

int cmd_analyze(const std::string& checkpoint_path, const std::string& nodes,
                const std::string& edges, const std::string& split_path,
                const std::string& out_dir, bool exclude_self) {
  return guard([&] {
    const LoadedRun run = load_run(checkpoint_path, nodes, edges, split_path);
    std::filesystem::create_directories(out_dir);

    NoGradGuard eval_mode;
    const ForwardOutput out =
        encode(run.graph.features, run.pe.vectors, run.ckpt.params, true);
    export_latents(out.mu, run.graph.labels, out_dir + "/latents.csv");

    const TrainAdjacency adj =
        TrainAdjacency::from_edges(run.graph.n, run.split.train_pos);
    const AttentionByDistance abd =
        attention_by_distance(out.attention, adj);
    const GlobalityReport report = globality(abd, exclude_self);
    export_analysis(abd, report, out_dir + "/attention_by_spd.csv",
                    out_dir + "/globality.csv");
    std::printf("wrote %s/{latents,attention_by_spd,globality}.csv\n",
                out_dir.c_str());
  });
}

}  // namespace ggtvae
