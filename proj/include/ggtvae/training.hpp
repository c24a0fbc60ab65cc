#pragma once

#include <cstdint>
#include <vector>

#include "ggtvae/adamw.hpp"
#include "ggtvae/eval.hpp"
#include "ggtvae/graph.hpp"
#include "ggtvae/model.hpp"
#include "ggtvae/spectral.hpp"

namespace ggtvae {

struct TrainConfig {
  int epochs = 500;
  double lr = 1e-3;
  double weight_decay = 5e-4;
  double beta = 0.5e-3;
  int patience = 50;
  std::uint64_t seed = 0;
  int eval_every = 1;

  void validate() const;
};

struct LossCurvePoint {
  int epoch = 0;  // 1-based
  double recon = 0.0;
  double kl = 0.0;
  double val_auc = -1.0;  // -1 on epochs without a validation pass
};

struct RunResult {
  int best_epoch = 0;
  double val_auc = 0.0;
  double val_ap = 0.0;
  double test_auc = 0.0;
  double test_ap = 0.0;
  std::vector<LossCurvePoint> loss_curve;
  std::uint64_t seed = 0;
};

struct LossParts {
  Tensor total;
  Tensor recon;
  Tensor kl;
};

// recon = mean BCE over positives (target 1) and negatives (target 0);
// kl = (1/N) * sum_i -0.5 * sum_j (1 + logvar - mu^2 - exp(logvar));
// total = recon + beta * kl. Requires |neg| == |pos| (balanced sampling).
LossParts compute_loss(const ForwardOutput& out,
                       const std::vector<Edge>& train_pos,
                       const std::vector<Edge>& train_neg, double beta);

struct EpochStats {
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;
};

// One full-batch step: fresh negatives (count = |train_pos|, all true edges
// excluded), forward with reparameterized Z, backward, optimizer step.
EpochStats train_epoch(const ModelParams& params, const Graph& g,
                       const Tensor& pe, const std::vector<Edge>& train_pos,
                       AdamW& opt, double beta, Rng& reparam_rng,
                       std::uint64_t negative_seed);

// Full training protocol: early stopping on validation ROC-AUC (strict
// improvement, `patience` evaluations), best-epoch parameter restore, test
// metrics at the restored parameters. Optionally hands back the restored
// parameters and the PE used, for checkpointing and analysis. When
// pe_cache_path is set, the PE is loaded from it if the (adjacency, k) key
// matches and written to it after a recompute.
RunResult fit(const Graph& g, const EdgeSplit& split, const ModelConfig& mcfg,
              const TrainConfig& tcfg, ModelParams* out_params = nullptr,
              Tensor* out_pe = nullptr,
              const std::string& pe_cache_path = "");

// laplacian_pe over the training edges, optionally through the cache file.
PositionalEncoding training_pe(const TrainAdjacency& adj, int k,
                               const std::string& pe_cache_path);

// Independent split + fit per seed; one failed seed fails the run.
std::vector<RunResult> multi_seed(const Graph& g, const ModelConfig& mcfg,
                                  const TrainConfig& base,
                                  const std::vector<std::uint64_t>& seeds,
                                  double val_frac = 0.05,
                                  double test_frac = 0.10);

struct AggregateResult {
  double mean_auc = 0.0;
  double std_auc = 0.0;
  double mean_ap = 0.0;
  double std_ap = 0.0;
  int n_seeds = 0;
};

// Sample mean and sample standard deviation (n-1) of test AUC/AP.
AggregateResult aggregate(const std::vector<RunResult>& runs);

}  // namespace ggtvae
