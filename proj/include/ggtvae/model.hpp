#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ggtvae/graph.hpp"
#include "ggtvae/rng.hpp"
#include "ggtvae/tensor.hpp"

namespace ggtvae {

struct ModelConfig {
  int layers = 4;
  int heads = 4;
  int d_hid = 128;
  int d_z = 32;
  int pe_dim = 16;
  int ffn_mult = 2;
  double beta = 0.5e-3;

  void validate() const;
  int d_k() const { return d_hid / heads; }
};

struct HeadParams {
  Tensor w_q, w_k, w_v;  // d_hid x d_k each
};

struct LayerParams {
  std::vector<HeadParams> heads;
  Tensor w_o;                  // d_hid x d_hid
  Tensor w1, b1, w2, b2;       // FFN
  Tensor ln1_gamma, ln1_beta;  // after attention residual
  Tensor ln2_gamma, ln2_beta;  // after FFN residual
};

struct ModelParams {
  ModelConfig config;
  int d_node = 0;
  Tensor w_x;  // d_node x d_hid
  Tensor w_p;  // pe_dim x d_hid
  std::vector<LayerParams> layers;
  Tensor w_mu, b_mu;          // d_hid x d_z, 1 x d_z
  Tensor w_logvar, b_logvar;  // d_hid x d_z, 1 x d_z

  // Xavier-uniform weights, zero biases, LayerNorm gamma=1/beta=0.
  static ModelParams init(const ModelConfig& cfg, int d_node,
                          std::uint64_t seed);

  // Name/handle pairs sorted by path, e.g. "layer.00.head.01.w_q". The fixed
  // order is the checkpoint blob order and the optimizer slot order.
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;

  void zero_grad() const;
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& snap) const;
  std::size_t n_scalars() const;
};

struct AttentionRecord {
  // probs[layer][head] is an N x N row-stochastic matrix.
  std::vector<std::vector<Tensor>> probs;
};

struct ForwardOutput {
  Tensor mu;      // N x d_z
  Tensor logvar;  // N x d_z
  Tensor z;       // filled by the caller (reparameterize or mu); starts = mu
  AttentionRecord attention;
};

Tensor embed(const Tensor& features, const Tensor& pe,
             const ModelParams& params);

Tensor multi_head_attention(const Tensor& n_in, const LayerParams& lp,
                            int heads, std::vector<Tensor>* attn_out);

Tensor transformer_layer(const Tensor& n_in, const LayerParams& lp, int heads,
                         std::vector<Tensor>* attn_out);

ForwardOutput encode(const Tensor& features, const Tensor& pe,
                     const ModelParams& params, bool capture_attention);

Tensor reparameterize(const Tensor& mu, const Tensor& logvar, Rng& rng);

Tensor decode_pairs(const Tensor& z, const std::vector<Edge>& pairs);

// sigma(Z Z^T) with the diagonal (self-loops) forced to zero.
Tensor decode_full(const Tensor& z);

}  // namespace ggtvae
