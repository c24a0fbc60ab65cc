#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ggtvae/tensor.hpp"

namespace ggtvae {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
};

// AdamW with decoupled weight decay: theta <- theta * (1 - lr*wd) applied
// before the bias-corrected moment update.
class AdamW {
 public:
  AdamW(std::vector<std::pair<std::string, Tensor>> params, AdamWConfig cfg);

  // One update over all registered parameters. Throws ValueError naming the
  // parameter if its gradient has not been populated.
  void step();

  std::int64_t step_count() const { return step_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  struct Slot {
    std::string name;
    Tensor param;
    std::vector<double> m;
    std::vector<double> v;
  };
  std::vector<Slot> slots_;
  AdamWConfig cfg_;
  std::int64_t step_ = 0;
};

}  // namespace ggtvae
