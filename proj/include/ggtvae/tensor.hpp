#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ggtvae/common.hpp"
#include "ggtvae/rng.hpp"

namespace ggtvae {

namespace detail {

struct TensorNode {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward;  // reads this->grad, accumulates into parents
};

}  // namespace detail

// Scoped switch that disables graph recording (evaluation / finite-difference
// probes). Ops run forward-only while a guard is alive.
bool grad_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Dense row-major real64 matrix with optional reverse-mode gradient.
// Copying a Tensor copies the handle, not the buffer; ops build a dynamic
// operation graph that backward() walks in reverse topological order.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  static Tensor from_data(std::size_t rows, std::size_t cols,
                          std::vector<double> data);

  bool defined() const { return node_ != nullptr; }
  std::size_t rows() const { return node_ ? node_->rows : 0; }
  std::size_t cols() const { return node_ ? node_->cols : 0; }
  std::size_t size() const { return node_ ? node_->value.size() : 0; }

  double at(std::size_t r, std::size_t c) const;
  std::span<const double> values() const;
  std::span<double> values();  // in-place mutation; leaf tensors only
  double item() const;         // 1x1 tensors

  Tensor& set_requires_grad(bool on = true);
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  std::span<const double> grad() const;
  void zero_grad();

  // Reverse-mode sweep from a scalar root.
  void backward() const;

  // Deep copy of the value buffer; result is a detached leaf.
  Tensor clone_detached() const;

  std::shared_ptr<detail::TensorNode> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node)
      : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;

  friend Tensor make_op_result(std::size_t, std::size_t, std::vector<double>,
                               std::vector<Tensor>,
                               std::function<void(detail::TensorNode&)>,
                               const char*);
};

// ---- operations ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& x, double c);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);
Tensor add_rowvec(const Tensor& x, const Tensor& b);  // b is 1 x cols
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor sum(const Tensor& x);  // 1x1

// Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
// Differentiable w.r.t. pred; returns a 1x1 tensor.
Tensor bce(const Tensor& pred, const Tensor& target);

// out[i] = dot(x[row us[i]], x[row vs[i]]); backward scatters into both rows.
Tensor pair_dots(const Tensor& x, const std::vector<int>& us,
                 const std::vector<int>& vs);

// softmax_rows(q k^T * inv_sqrt_dk) computed without retaining the logits.
// Value-identical to the composed form; backward recovers dQ/dK from the
// stored probabilities.
Tensor attention_probs(const Tensor& q, const Tensor& k, double inv_sqrt_dk);

// ---- gradient checking -----------------------------------------------------

// Central finite differences (h = 1e-5) against reverse-mode gradients over
// every entry of every listed parameter. Returns the worst relative error,
// |a - n| / max(1, |a|, |n|). f must be a deterministic scalar computation.
double grad_check(const std::function<Tensor()>& f,
                  const std::vector<Tensor>& params, double h = 1e-5);

}  // namespace ggtvae
