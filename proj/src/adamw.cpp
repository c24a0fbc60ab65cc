#include "ggtvae/adamw.hpp"

#include <cmath>

namespace ggtvae {

AdamW::AdamW(std::vector<std::pair<std::string, Tensor>> params,
             AdamWConfig cfg)
    : cfg_(cfg) {
  if (cfg_.lr <= 0.0) throw ValueError("AdamW: lr must be positive");
  slots_.reserve(params.size());
  for (auto& [name, tensor] : params) {
    Slot slot;
    slot.name = name;
    slot.param = tensor;
    slot.m.assign(tensor.size(), 0.0);
    slot.v.assign(tensor.size(), 0.0);
    slots_.push_back(std::move(slot));
  }
}

void AdamW::step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (auto& slot : slots_) {
    if (!slot.param.has_grad()) {
      throw ValueError("AdamW: missing gradient for parameter '" + slot.name +
                       "'");
    }
    auto theta = slot.param.values();
    auto g = slot.param.grad();
    const double decay = 1.0 - cfg_.lr * cfg_.weight_decay;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      theta[i] *= decay;
      slot.m[i] = cfg_.beta1 * slot.m[i] + (1.0 - cfg_.beta1) * g[i];
      slot.v[i] = cfg_.beta2 * slot.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double m_hat = slot.m[i] / bc1;
      const double v_hat = slot.v[i] / bc2;
      theta[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

}  // namespace ggtvae
