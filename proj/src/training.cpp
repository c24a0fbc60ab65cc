#include "ggtvae/training.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ggtvae {

void TrainConfig::validate() const {
  if (epochs < 1) throw ValueError("train config: epochs must be >= 1");
  if (patience < 1) throw ValueError("train config: patience must be >= 1");
  if (lr <= 0.0) throw ValueError("train config: lr must be > 0");
  if (weight_decay < 0.0)
    throw ValueError("train config: weight_decay must be >= 0");
  if (beta < 0.0) throw ValueError("train config: beta must be >= 0");
  if (eval_every < 1) throw ValueError("train config: eval_every must be >= 1");
}

LossParts compute_loss(const ForwardOutput& out,
                       const std::vector<Edge>& train_pos,
                       const std::vector<Edge>& train_neg, double beta) {
  if (train_pos.size() != train_neg.size())
    throw ValueError("compute_loss: " + std::to_string(train_pos.size()) +
                     " positives vs " + std::to_string(train_neg.size()) +
                     " negatives (must be balanced)");
  if (train_pos.empty()) throw ValueError("compute_loss: no training edges");

  std::vector<Edge> pairs = train_pos;
  pairs.insert(pairs.end(), train_neg.begin(), train_neg.end());
  Tensor probs = decode_pairs(out.z, pairs);
  Tensor targets(pairs.size(), 1, 0.0);
  {
    auto tv = targets.values();
    std::fill(tv.begin(), tv.begin() + train_pos.size(), 1.0);
  }

  LossParts parts;
  parts.recon = bce(probs, targets);

  const std::size_t n = out.mu.rows();
  Tensor ones(out.mu.rows(), out.mu.cols(), 1.0);
  Tensor inner = sub(sub(add(ones, out.logvar), mul(out.mu, out.mu)),
                     exp(out.logvar));
  parts.kl = scale(sum(inner), -0.5 / static_cast<double>(n));
  parts.total = add(parts.recon, scale(parts.kl, beta));
  return parts;
}

EpochStats train_epoch(const ModelParams& params, const Graph& g,
                       const Tensor& pe, const std::vector<Edge>& train_pos,
                       AdamW& opt, double beta, Rng& reparam_rng,
                       std::uint64_t negative_seed) {
  const std::vector<Edge> negatives =
      sample_negatives(g, train_pos.size(), {}, negative_seed);

  params.zero_grad();
  ForwardOutput out = encode(g.features, pe, params, false);
  out.z = reparameterize(out.mu, out.logvar, reparam_rng);
  const LossParts loss = compute_loss(out, train_pos, negatives, beta);

  EpochStats stats;
  stats.total = loss.total.item();
  stats.recon = loss.recon.item();
  stats.kl = loss.kl.item();
  if (stats.kl < -1e-9)
    throw TrainingError("kl divergence negative: " + std::to_string(stats.kl));

  loss.total.backward();
  opt.step();
  return stats;
}

PositionalEncoding training_pe(const TrainAdjacency& adj, int k,
                               const std::string& pe_cache_path) {
  if (pe_cache_path.empty()) return laplacian_pe(adj, k);
  const std::string key = adjacency_hash(adj);
  if (auto cached = load_pe_cache(pe_cache_path, key, k)) return *cached;
  PositionalEncoding pe = laplacian_pe(adj, k);
  save_pe_cache(pe, key, pe_cache_path);
  return pe;
}

RunResult fit(const Graph& g, const EdgeSplit& split, const ModelConfig& mcfg,
              const TrainConfig& tcfg, ModelParams* out_params,
              Tensor* out_pe, const std::string& pe_cache_path) {
  mcfg.validate();
  tcfg.validate();

  const TrainAdjacency adj = TrainAdjacency::from_edges(g.n, split.train_pos);
  const PositionalEncoding pe = training_pe(adj, mcfg.pe_dim, pe_cache_path);
  ModelParams params = ModelParams::init(mcfg, g.d_node(), tcfg.seed);
  AdamWConfig opt_cfg;
  opt_cfg.lr = tcfg.lr;
  opt_cfg.weight_decay = tcfg.weight_decay;
  AdamW opt(params.named_parameters(), opt_cfg);
  Rng reparam_rng(derive_seed(tcfg.seed, streams::kReparam));

  RunResult result;
  result.seed = tcfg.seed;
  double best_auc = -1.0;
  double best_ap = 0.0;
  int best_epoch = 0;
  int stale = 0;
  std::vector<std::vector<double>> best_snapshot;
  EpochStats last{};

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    try {
      last = train_epoch(params, g, pe.vectors, split.train_pos, opt,
                         tcfg.beta, reparam_rng,
                         derive_seed(tcfg.seed, streams::kNegatives,
                                     static_cast<std::uint64_t>(epoch)));
    } catch (const NumericError& e) {
      throw TrainingError("aborted at epoch " + std::to_string(epoch) + ": " +
                          e.what() + " (last recon=" +
                          std::to_string(last.recon) +
                          ", kl=" + std::to_string(last.kl) + ")");
    } catch (const TrainingError& e) {
      throw TrainingError("aborted at epoch " + std::to_string(epoch) + ": " +
                          e.what());
    }

    LossCurvePoint point;
    point.epoch = epoch;
    point.recon = last.recon;
    point.kl = last.kl;

    const bool do_eval = epoch % tcfg.eval_every == 0 ||
                         (epoch == tcfg.epochs && best_epoch == 0);
    if (do_eval) {
      const EvalMetrics val =
          evaluate_split(params, g.features, pe.vectors, split,
                         SplitPart::kVal);
      point.val_auc = val.auc;
      if (val.auc > best_auc) {
        best_auc = val.auc;
        best_ap = val.ap;
        best_epoch = epoch;
        best_snapshot = params.snapshot();
        stale = 0;
      } else {
        ++stale;
      }
    }
    result.loss_curve.push_back(point);
    if (stale >= tcfg.patience) break;
  }

  params.restore(best_snapshot);
  result.best_epoch = best_epoch;
  result.val_auc = best_auc;
  result.val_ap = best_ap;
  const EvalMetrics test = evaluate_split(params, g.features, pe.vectors,
                                          split, SplitPart::kTest);
  result.test_auc = test.auc;
  result.test_ap = test.ap;

  if (out_params) *out_params = std::move(params);
  if (out_pe) *out_pe = pe.vectors;
  return result;
}

std::vector<RunResult> multi_seed(const Graph& g, const ModelConfig& mcfg,
                                  const TrainConfig& base,
                                  const std::vector<std::uint64_t>& seeds,
                                  double val_frac, double test_frac) {
  if (seeds.size() < 2)
    throw ValueError("multi_seed: need >= 2 seeds for a standard deviation");
  std::vector<RunResult> runs;
  runs.reserve(seeds.size());
  for (std::uint64_t seed : seeds) {
    const EdgeSplit split = split_edges(g, val_frac, test_frac, seed);
    TrainConfig tcfg = base;
    tcfg.seed = seed;
    runs.push_back(fit(g, split, mcfg, tcfg));
  }
  return runs;
}

AggregateResult aggregate(const std::vector<RunResult>& runs) {
  if (runs.size() < 2)
    throw ValueError("aggregate: need >= 2 runs for a standard deviation");
  AggregateResult agg;
  agg.n_seeds = static_cast<int>(runs.size());
  const double n = static_cast<double>(runs.size());
  for (const RunResult& r : runs) {
    agg.mean_auc += r.test_auc;
    agg.mean_ap += r.test_ap;
  }
  agg.mean_auc /= n;
  agg.mean_ap /= n;
  double ss_auc = 0.0;
  double ss_ap = 0.0;
  for (const RunResult& r : runs) {
    ss_auc += (r.test_auc - agg.mean_auc) * (r.test_auc - agg.mean_auc);
    ss_ap += (r.test_ap - agg.mean_ap) * (r.test_ap - agg.mean_ap);
  }
  agg.std_auc = std::sqrt(ss_auc / (n - 1.0));
  agg.std_ap = std::sqrt(ss_ap / (n - 1.0));
  return agg;
}

}  // namespace ggtvae
