#include "ggtvae/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace ggtvae {

namespace {

std::string pad2(int i) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%02d", i);
  return buf;
}

Tensor xavier(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit =
      std::sqrt(6.0 / (static_cast<double>(rows) + static_cast<double>(cols)));
  std::vector<double> data(rows * cols);
  for (double& v : data) v = rng.uniform(-limit, limit);
  Tensor t = Tensor::from_data(rows, cols, std::move(data));
  t.set_requires_grad();
  return t;
}

Tensor zeros_param(std::size_t rows, std::size_t cols, double fill = 0.0) {
  Tensor t(rows, cols, fill);
  t.set_requires_grad();
  return t;
}

}  // namespace

void ModelConfig::validate() const {
  if (layers < 0) throw ValueError("config: layers must be >= 0");
  if (heads < 1 || d_hid < 1 || d_z < 1 || pe_dim < 1 || ffn_mult < 1)
    throw ValueError("config: all dimensions must be >= 1");
  if (d_hid % heads != 0)
    throw ValueError("config: d_hid = " + std::to_string(d_hid) +
                     " not divisible by heads = " + std::to_string(heads));
  if (beta < 0.0) throw ValueError("config: beta must be >= 0");
}

ModelParams ModelParams::init(const ModelConfig& cfg, int d_node,
                              std::uint64_t seed) {
  cfg.validate();
  if (d_node < 1) throw ValueError("init: d_node must be >= 1");
  Rng rng(derive_seed(seed, streams::kInit));

  ModelParams p;
  p.config = cfg;
  p.d_node = d_node;
  const auto hid = static_cast<std::size_t>(cfg.d_hid);
  const auto dk = static_cast<std::size_t>(cfg.d_k());
  const auto ffn = hid * static_cast<std::size_t>(cfg.ffn_mult);
  const auto dz = static_cast<std::size_t>(cfg.d_z);

  p.w_x = xavier(static_cast<std::size_t>(d_node), hid, rng);
  p.w_p = xavier(static_cast<std::size_t>(cfg.pe_dim), hid, rng);
  p.layers.resize(static_cast<std::size_t>(cfg.layers));
  for (auto& lp : p.layers) {
    lp.heads.resize(static_cast<std::size_t>(cfg.heads));
    for (auto& hp : lp.heads) {
      hp.w_q = xavier(hid, dk, rng);
      hp.w_k = xavier(hid, dk, rng);
      hp.w_v = xavier(hid, dk, rng);
    }
    lp.w_o = xavier(hid, hid, rng);
    lp.w1 = xavier(hid, ffn, rng);
    lp.b1 = zeros_param(1, ffn);
    lp.w2 = xavier(ffn, hid, rng);
    lp.b2 = zeros_param(1, hid);
    lp.ln1_gamma = zeros_param(1, hid, 1.0);
    lp.ln1_beta = zeros_param(1, hid);
    lp.ln2_gamma = zeros_param(1, hid, 1.0);
    lp.ln2_beta = zeros_param(1, hid);
  }
  p.w_mu = xavier(hid, dz, rng);
  p.b_mu = zeros_param(1, dz);
  p.w_logvar = xavier(hid, dz, rng);
  p.b_logvar = zeros_param(1, dz);
  return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named_parameters()
    const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("embed.w_p", w_p);
  out.emplace_back("embed.w_x", w_x);
  out.emplace_back("head.b_logvar", b_logvar);
  out.emplace_back("head.b_mu", b_mu);
  out.emplace_back("head.w_logvar", w_logvar);
  out.emplace_back("head.w_mu", w_mu);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string base = "layer." + pad2(static_cast<int>(l)) + ".";
    const LayerParams& lp = layers[l];
    out.emplace_back(base + "attn.w_o", lp.w_o);
    out.emplace_back(base + "ffn.b1", lp.b1);
    out.emplace_back(base + "ffn.b2", lp.b2);
    out.emplace_back(base + "ffn.w1", lp.w1);
    out.emplace_back(base + "ffn.w2", lp.w2);
    for (std::size_t h = 0; h < lp.heads.size(); ++h) {
      const std::string hb = base + "head." + pad2(static_cast<int>(h)) + ".";
      out.emplace_back(hb + "w_k", lp.heads[h].w_k);
      out.emplace_back(hb + "w_q", lp.heads[h].w_q);
      out.emplace_back(hb + "w_v", lp.heads[h].w_v);
    }
    out.emplace_back(base + "ln1.beta", lp.ln1_beta);
    out.emplace_back(base + "ln1.gamma", lp.ln1_gamma);
    out.emplace_back(base + "ln2.beta", lp.ln2_beta);
    out.emplace_back(base + "ln2.gamma", lp.ln2_gamma);
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

void ModelParams::zero_grad() const {
  for (auto& [name, t] : named_parameters()) {
    (void)name;
    Tensor handle = t;
    handle.zero_grad();
  }
}

std::vector<std::vector<double>> ModelParams::snapshot() const {
  std::vector<std::vector<double>> snap;
  for (const auto& [name, t] : named_parameters()) {
    (void)name;
    auto v = t.values();
    snap.emplace_back(v.begin(), v.end());
  }
  return snap;
}

void ModelParams::restore(const std::vector<std::vector<double>>& snap) const {
  auto named = named_parameters();
  if (snap.size() != named.size())
    throw ValueError("restore: snapshot has wrong parameter count");
  for (std::size_t i = 0; i < named.size(); ++i) {
    Tensor t = named[i].second;
    auto v = t.values();
    if (snap[i].size() != v.size())
      throw ValueError("restore: size mismatch for " + named[i].first);
    std::copy(snap[i].begin(), snap[i].end(), v.begin());
  }
}

std::size_t ModelParams::n_scalars() const {
  std::size_t total = 0;
  for (const auto& [name, t] : named_parameters()) {
    (void)name;
    total += t.size();
  }
  return total;
}

Tensor embed(const Tensor& features, const Tensor& pe,
             const ModelParams& params) {
  if (features.rows() != pe.rows())
    throw DimError("embed: features and pe row counts differ");
  return add(matmul(features, params.w_x), matmul(pe, params.w_p));
}

Tensor multi_head_attention(const Tensor& n_in, const LayerParams& lp,
                            int heads, std::vector<Tensor>* attn_out) {
  if (static_cast<int>(lp.heads.size()) != heads)
    throw DimError("multi_head_attention: head count mismatch");
  const double inv_sqrt_dk =
      1.0 / std::sqrt(static_cast<double>(lp.heads[0].w_q.cols()));
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(lp.heads.size());
  for (const HeadParams& hp : lp.heads) {
    Tensor q = matmul(n_in, hp.w_q);
    Tensor k = matmul(n_in, hp.w_k);
    Tensor v = matmul(n_in, hp.w_v);
    Tensor probs = attention_probs(q, k, inv_sqrt_dk);
    if (attn_out) attn_out->push_back(probs);
    head_outputs.push_back(matmul(probs, v));
  }
  return matmul(concat_cols(head_outputs), lp.w_o);
}

Tensor transformer_layer(const Tensor& n_in, const LayerParams& lp, int heads,
                         std::vector<Tensor>* attn_out) {
  Tensor mha = multi_head_attention(n_in, lp, heads, attn_out);
  Tensor t = layer_norm(add(n_in, mha), lp.ln1_gamma, lp.ln1_beta);
  Tensor hidden = relu(add_rowvec(matmul(t, lp.w1), lp.b1));
  Tensor ffn = add_rowvec(matmul(hidden, lp.w2), lp.b2);
  return layer_norm(add(t, ffn), lp.ln2_gamma, lp.ln2_beta);
}

ForwardOutput encode(const Tensor& features, const Tensor& pe,
                     const ModelParams& params, bool capture_attention) {
  ForwardOutput out;
  if (capture_attention) out.attention.probs.resize(params.layers.size());
  Tensor h = embed(features, pe, params);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    std::vector<Tensor>* slot =
        capture_attention ? &out.attention.probs[l] : nullptr;
    h = transformer_layer(h, params.layers[l], params.config.heads, slot);
  }
  out.mu = add_rowvec(matmul(h, params.w_mu), params.b_mu);
  out.logvar = add_rowvec(matmul(h, params.w_logvar), params.b_logvar);
  out.z = out.mu;
  return out;
}

Tensor reparameterize(const Tensor& mu, const Tensor& logvar, Rng& rng) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols())
    throw DimError("reparameterize: mu/logvar shape mismatch");
  std::vector<double> noise(mu.size());
  for (double& v : noise) v = rng.normal();
  Tensor eps = Tensor::from_data(mu.rows(), mu.cols(), std::move(noise));
  return add(mu, mul(eps, exp(scale(logvar, 0.5))));
}

Tensor decode_pairs(const Tensor& z, const std::vector<Edge>& pairs) {
  std::vector<int> us, vs;
  us.reserve(pairs.size());
  vs.reserve(pairs.size());
  const int n = static_cast<int>(z.rows());
  for (const Edge& e : pairs) {
    if (e.u == e.v)
      throw ValueError("decode_pairs: self-loop (" + std::to_string(e.u) +
                       "," + std::to_string(e.v) + ") is masked");
    if (e.u < 0 || e.u >= n || e.v < 0 || e.v >= n)
      throw ValueError("decode_pairs: node index out of range");
    us.push_back(e.u);
    vs.push_back(e.v);
  }
  return sigmoid(pair_dots(z, us, vs));
}

Tensor decode_full(const Tensor& z) {
  const std::size_t n = z.rows();
  Tensor probs = sigmoid(matmul(z, transpose(z)));
  Tensor mask(n, n, 1.0);
  auto mv = mask.values();
  for (std::size_t i = 0; i < n; ++i) mv[i * n + i] = 0.0;
  return mul(probs, mask);
}

}  // namespace ggtvae
