#pragma once

#include <cstdint>
#include <string>

#include "ggtvae/model.hpp"

namespace ggtvae {

struct CheckpointMeta {
  ModelConfig config;
  int d_node = 0;
  int epoch = 0;
  std::uint64_t seed = 0;
  double val_auc = 0.0;
  double val_ap = 0.0;
  double test_auc = 0.0;
  double test_ap = 0.0;
  std::string graph_hash;
};

struct Checkpoint {
  CheckpointMeta meta;
  ModelParams params;
};

// One JSON header line (config, epoch, seed, metrics, graph hash, parameter
// manifest) followed by a flat little-endian real64 blob, parameters in
// alphabetical path order.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const CheckpointMeta& meta);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace ggtvae
