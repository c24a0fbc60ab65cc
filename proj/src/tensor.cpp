#include "ggtvae/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace ggtvae {

namespace {

thread_local bool g_grad_enabled = true;

void check_finite(const char* op, std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": non-finite value in output");
    }
  }
}

void require(bool cond, const char* op, const std::string& what) {
  if (!cond) throw DimError(std::string(op) + ": " + what);
}

std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void ensure_grad(detail::TensorNode& n) {
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
}

// c (m x n) += a (m x k) * b (k x n)
void matmul_accum(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      if (aip == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// c (m x n) += a (m x k) * b^T, b stored (n x k)
void matmul_nt_accum(const double* a, const double* b, double* c,
                     std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// c (m x n) += a^T * b, a stored (k x m), b (k x n)
void matmul_tn_accum(const double* a, const double* b, double* c,
                     std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double aip = arow[i];
      if (aip == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// Row-stabilized softmax shared by softmax_rows and attention_probs so the
// fused path is value-identical to the composed one.
void softmax_row_inplace(double* row, std::size_t n) {
  double mx = row[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    row[j] = std::exp(row[j] - mx);
    total += row[j];
  }
  const double inv = 1.0 / total;
  for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
}

// dx_row = y_row * (g_row - dot(g_row, y_row))
void softmax_backward_row(const double* y, const double* g, double* dx,
                          std::size_t n) {
  double dot = 0.0;
  for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
  for (std::size_t j = 0; j < n; ++j) dx[j] = y[j] * (g[j] - dot);
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill) {
  node_ = std::make_shared<detail::TensorNode>();
  node_->rows = rows;
  node_->cols = cols;
  node_->value.assign(rows * cols, fill);
}

Tensor Tensor::from_data(std::size_t rows, std::size_t cols,
                         std::vector<double> data) {
  if (data.size() != rows * cols) {
    throw DimError("from_data: buffer length " + std::to_string(data.size()) +
                   " does not match " + std::to_string(rows) + "x" +
                   std::to_string(cols));
  }
  Tensor t;
  t.node_ = std::make_shared<detail::TensorNode>();
  t.node_->rows = rows;
  t.node_->cols = cols;
  t.node_->value = std::move(data);
  return t;
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return node_->value[r * node_->cols + c];
}

std::span<const double> Tensor::values() const { return node_->value; }
std::span<double> Tensor::values() { return node_->value; }

double Tensor::item() const {
  if (size() != 1) throw DimError("item: tensor is not 1x1");
  return node_->value[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  if (on && node_->backward) {
    throw ValueError("set_requires_grad: only leaf tensors may be marked");
  }
  node_->requires_grad = on;
  return *this;
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw ValueError("grad: no gradient accumulated");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.assign(node_->value.size(), 0.0);
}

Tensor Tensor::clone_detached() const {
  return Tensor::from_data(rows(), cols(),
                           std::vector<double>(node_->value));
}

void Tensor::backward() const {
  if (!node_ || node_->value.size() != 1) {
    throw DimError("backward: root must be a 1x1 scalar");
  }
  // Iterative post-order DFS for the topological order.
  std::vector<detail::TensorNode*> order;
  std::unordered_set<detail::TensorNode*> visited;
  std::vector<std::pair<detail::TensorNode*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      detail::TensorNode* p = n->parents[idx++].get();
      if (visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  ensure_grad(*node_);
  node_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorNode* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

Tensor make_op_result(std::size_t rows, std::size_t cols,
                      std::vector<double> value, std::vector<Tensor> inputs,
                      std::function<void(detail::TensorNode&)> backward,
                      const char* op) {
  check_finite(op, value);
  auto node = std::make_shared<detail::TensorNode>();
  node->rows = rows;
  node->cols = cols;
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(inputs.size());
      for (const auto& in : inputs) node->parents.push_back(in.node());
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

// ---- binary / unary elementwise --------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add",
          shape_str(a) + " vs " + shape_str(b));
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_op_result(
      a.rows(), a.cols(), std::move(out), {a, b},
      [](detail::TensorNode& n) {
        for (int s = 0; s < 2; ++s) {
          auto& p = *n.parents[s];
          if (!p.requires_grad) continue;
          ensure_grad(p);
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            p.grad[i] += n.grad[i];
        }
      },
      "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub",
          shape_str(a) + " vs " + shape_str(b));
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_op_result(
      a.rows(), a.cols(), std::move(out), {a, b},
      [](detail::TensorNode& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.requires_grad) {
          ensure_grad(pa);
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            pa.grad[i] += n.grad[i];
        }
        if (pb.requires_grad) {
          ensure_grad(pb);
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            pb.grad[i] -= n.grad[i];
        }
      },
      "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul",
          shape_str(a) + " vs " + shape_str(b));
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_op_result(
      a.rows(), a.cols(), std::move(out), {a, b},
      [](detail::TensorNode& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        // a and b may alias (e.g. mul(x, x)); accumulation handles it.
        if (pa.requires_grad) {
          ensure_grad(pa);
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            pa.grad[i] += n.grad[i] * pb.value[i];
        }
        if (pb.requires_grad) {
          ensure_grad(pb);
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            pb.grad[i] += n.grad[i] * pa.value[i];
        }
      },
      "mul");
}

Tensor scale(const Tensor& x, double c) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * xv[i];
  return make_op_result(
      x.rows(), x.cols(), std::move(out), {x},
      [c](detail::TensorNode& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        ensure_grad(p);
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          p.grad[i] += c * n.grad[i];
      },
      "scale");
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return make_op_result(
      x.rows(), x.cols(), std::move(out), {x},
      [](detail::TensorNode& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        ensure_grad(p);
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          if (p.value[i] > 0.0) p.grad[i] += n.grad[i];
      },
      "relu");
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = xv[i];
    // Split by sign to avoid exp overflow.
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                      : std::exp(v) / (1.0 + std::exp(v));
  }
  return make_op_result(
      x.rows(), x.cols(), std::move(out), {x},
      [](detail::TensorNode& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        ensure_grad(p);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          const double y = n.value[i];
          p.grad[i] += n.grad[i] * y * (1.0 - y);
        }
      },
      "sigmoid");
}

Tensor exp(const Tensor& x) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(xv[i]);
  return make_op_result(
      x.rows(), x.cols(), std::move(out), {x},
      [](detail::TensorNode& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        ensure_grad(p);
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          p.grad[i] += n.grad[i] * n.value[i];
      },
      "exp");
}

// ---- matrix ops --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul",
          shape_str(a) + " * " + shape_str(b));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  matmul_accum(a.values().data(), b.values().data(), out.data(), m, k, n);
  return make_op_result(
      m, n, std::move(out), {a, b},
      [m, k, n](detail::TensorNode& node) {
        auto& pa = *node.parents[0];
        auto& pb = *node.parents[1];
        if (pa.requires_grad) {
          ensure_grad(pa);
          // dA += dC * B^T
          matmul_nt_accum(node.grad.data(), pb.value.data(), pa.grad.data(),
                          m, n, k);
        }
        if (pb.requires_grad) {
          ensure_grad(pb);
          // dB += A^T * dC
          matmul_tn_accum(pa.value.data(), node.grad.data(), pb.grad.data(),
                          k, m, n);
        }
      },
      "matmul");
}

Tensor transpose(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(m * n);
  auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = xv[i * n + j];
  return make_op_result(
      n, m, std::move(out), {x},
      [m, n](detail::TensorNode& node) {
        auto& p = *node.parents[0];
        if (!p.requires_grad) return;
        ensure_grad(p);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j)
            p.grad[i * n + j] += node.grad[j * m + i];
      },
      "transpose");
}

Tensor softmax_rows(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  require(n >= 1, "softmax_rows", "empty rows");
  std::vector<double> out(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < m; ++i) softmax_row_inplace(out.data() + i * n, n);
  return make_op_result(
      m, n, std::move(out), {x},
      [m, n](detail::TensorNode& node) {
        auto& p = *node.parents[0];
        if (!p.requires_grad) return;
        ensure_grad(p);
        std::vector<double> dx(n);
        for (std::size_t i = 0; i < m; ++i) {
          softmax_backward_row(node.value.data() + i * n,
                               node.grad.data() + i * n, dx.data(), n);
          for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += dx[j];
        }
      },
      "softmax_rows");
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  const std::size_t m = x.rows(), n = x.cols();
  require(gamma.rows() == 1 && gamma.cols() == n, "layer_norm",
          "gamma must be 1x" + std::to_string(n));
  require(beta.rows() == 1 && beta.cols() == n, "layer_norm",
          "beta must be 1x" + std::to_string(n));
  if (eps <= 0.0) throw ValueError("layer_norm: eps must be positive");
  auto xv = x.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  std::vector<double> out(m * n);
  auto xhat = std::make_shared<std::vector<double>>(m * n);
  auto inv_std = std::make_shared<std::vector<double>>(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data() + i * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = row[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double xh = (row[j] - mean) * is;
      (*xhat)[i * n + j] = xh;
      out[i * n + j] = gv[j] * xh + bv[j];
    }
  }
  return make_op_result(
      m, n, std::move(out), {x, gamma, beta},
      [m, n, xhat, inv_std](detail::TensorNode& node) {
        auto& px = *node.parents[0];
        auto& pg = *node.parents[1];
        auto& pb = *node.parents[2];
        if (pg.requires_grad) {
          ensure_grad(pg);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
              pg.grad[j] += node.grad[i * n + j] * (*xhat)[i * n + j];
        }
        if (pb.requires_grad) {
          ensure_grad(pb);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
              pb.grad[j] += node.grad[i * n + j];
        }
        if (px.requires_grad) {
          ensure_grad(px);
          // dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat .* xhat))
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t i = 0; i < m; ++i) {
            double mean_dxh = 0.0, mean_dxh_xh = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double dxh = node.grad[i * n + j] * pg.value[j];
              mean_dxh += dxh;
              mean_dxh_xh += dxh * (*xhat)[i * n + j];
            }
            mean_dxh *= inv_n;
            mean_dxh_xh *= inv_n;
            const double is = (*inv_std)[i];
            for (std::size_t j = 0; j < n; ++j) {
              const double dxh = node.grad[i * n + j] * pg.value[j];
              px.grad[i * n + j] +=
                  is * (dxh - mean_dxh - (*xhat)[i * n + j] * mean_dxh_xh);
            }
          }
        }
      },
      "layer_norm");
}

Tensor add_rowvec(const Tensor& x, const Tensor& b) {
  const std::size_t m = x.rows(), n = x.cols();
  require(b.rows() == 1 && b.cols() == n, "add_rowvec",
          "bias must be 1x" + std::to_string(n));
  std::vector<double> out(m * n);
  auto xv = x.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + bv[j];
  return make_op_result(
      m, n, std::move(out), {x, b},
      [m, n](detail::TensorNode& node) {
        auto& px = *node.parents[0];
        auto& pb = *node.parents[1];
        if (px.requires_grad) {
          ensure_grad(px);
          for (std::size_t i = 0; i < node.grad.size(); ++i)
            px.grad[i] += node.grad[i];
        }
        if (pb.requires_grad) {
          ensure_grad(pb);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
              pb.grad[j] += node.grad[i * n + j];
        }
      },
      "add_rowvec");
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimError("concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.rows() == m, "concat_cols", "row counts differ");
    total += p.cols();
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    offsets.push_back(offset);
    widths.push_back(w);
    auto pv = p.values();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j)
        out[i * total + offset + j] = pv[i * w + j];
    offset += w;
  }
  return make_op_result(
      m, total, std::move(out), parts,
      [m, total, offsets, widths](detail::TensorNode& node) {
        for (std::size_t s = 0; s < node.parents.size(); ++s) {
          auto& p = *node.parents[s];
          if (!p.requires_grad) continue;
          ensure_grad(p);
          const std::size_t w = widths[s], off = offsets[s];
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j)
              p.grad[i * w + j] += node.grad[i * total + off + j];
        }
      },
      "concat_cols");
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return make_op_result(
      1, 1, {total}, {x},
      [](detail::TensorNode& node) {
        auto& p = *node.parents[0];
        if (!p.requires_grad) return;
        ensure_grad(p);
        const double g = node.grad[0];
        for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g;
      },
      "sum");
}

Tensor bce(const Tensor& pred, const Tensor& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), "bce",
          shape_str(pred) + " vs " + shape_str(target));
  constexpr double kEps = 1e-7;
  const std::size_t count = pred.size();
  require(count > 0, "bce", "empty input");
  auto pv = pred.values();
  auto tv = target.values();
  double loss = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double p = std::clamp(pv[i], kEps, 1.0 - kEps);
    loss -= tv[i] * std::log(p) + (1.0 - tv[i]) * std::log(1.0 - p);
  }
  loss /= static_cast<double>(count);
  return make_op_result(
      1, 1, {loss}, {pred, target},
      [count](detail::TensorNode& node) {
        auto& pp = *node.parents[0];
        auto& pt = *node.parents[1];
        if (!pp.requires_grad) return;
        ensure_grad(pp);
        const double g = node.grad[0] / static_cast<double>(count);
        for (std::size_t i = 0; i < count; ++i) {
          const double raw = pp.value[i];
          if (raw <= kEps || raw >= 1.0 - kEps) continue;  // clamped: zero slope
          pp.grad[i] += g * (raw - pt.value[i]) / (raw * (1.0 - raw));
        }
      },
      "bce");
}

Tensor pair_dots(const Tensor& x, const std::vector<int>& us,
                 const std::vector<int>& vs) {
  require(us.size() == vs.size(), "pair_dots", "index lists differ in length");
  const std::size_t m = us.size(), d = x.cols();
  const int n = static_cast<int>(x.rows());
  for (std::size_t i = 0; i < m; ++i) {
    if (us[i] < 0 || us[i] >= n || vs[i] < 0 || vs[i] >= n)
      throw ValueError("pair_dots: node index out of range");
  }
  auto xv = x.values();
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* ru = xv.data() + static_cast<std::size_t>(us[i]) * d;
    const double* rv = xv.data() + static_cast<std::size_t>(vs[i]) * d;
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += ru[j] * rv[j];
    out[i] = acc;
  }
  return make_op_result(
      m, 1, std::move(out), {x},
      [us, vs, d](detail::TensorNode& node) {
        auto& p = *node.parents[0];
        if (!p.requires_grad) return;
        ensure_grad(p);
        for (std::size_t i = 0; i < us.size(); ++i) {
          const double g = node.grad[i];
          double* gu = p.grad.data() + static_cast<std::size_t>(us[i]) * d;
          double* gv = p.grad.data() + static_cast<std::size_t>(vs[i]) * d;
          const double* ru = p.value.data() + static_cast<std::size_t>(us[i]) * d;
          const double* rv = p.value.data() + static_cast<std::size_t>(vs[i]) * d;
          for (std::size_t j = 0; j < d; ++j) {
            gu[j] += g * rv[j];
            gv[j] += g * ru[j];
          }
        }
      },
      "pair_dots");
}

Tensor attention_probs(const Tensor& q, const Tensor& k, double inv_sqrt_dk) {
  require(q.cols() == k.cols(), "attention_probs",
          shape_str(q) + " vs " + shape_str(k));
  const std::size_t n = q.rows(), dk = q.cols(), nk = k.rows();
  require(n == nk, "attention_probs", "q and k must have equal row counts");
  std::vector<double> probs(n * n, 0.0);
  matmul_nt_accum(q.values().data(), k.values().data(), probs.data(), n, dk, n);
  for (double& v : probs) v *= inv_sqrt_dk;
  for (std::size_t i = 0; i < n; ++i) softmax_row_inplace(probs.data() + i * n, n);
  return make_op_result(
      n, n, std::move(probs), {q, k},
      [n, dk, inv_sqrt_dk](detail::TensorNode& node) {
        auto& pq = *node.parents[0];
        auto& pk = *node.parents[1];
        if (!pq.requires_grad && !pk.requires_grad) return;
        // d_logits is transient; dQ += s * d_logits * K, dK += s * d_logits^T * Q.
        std::vector<double> dlogits(n * n);
        for (std::size_t i = 0; i < n; ++i)
          softmax_backward_row(node.value.data() + i * n,
                               node.grad.data() + i * n,
                               dlogits.data() + i * n, n);
        for (double& v : dlogits) v *= inv_sqrt_dk;
        if (pq.requires_grad) {
          ensure_grad(pq);
          matmul_accum(dlogits.data(), pk.value.data(), pq.grad.data(), n, n,
                       dk);
        }
        if (pk.requires_grad) {
          ensure_grad(pk);
          matmul_tn_accum(dlogits.data(), pq.value.data(), pk.grad.data(), n,
                          n, dk);
        }
      },
      "attention_probs");
}

double grad_check(const std::function<Tensor()>& f,
                  const std::vector<Tensor>& params, double h) {
  for (auto p : params) p.zero_grad();
  Tensor loss = f();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    if (p.has_grad()) {
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      analytic.emplace_back(p.size(), 0.0);
    }
  }
  double worst = 0.0;
  NoGradGuard guard;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    auto vals = p.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      vals[i] = saved + h;
      const double f_plus = f().item();
      vals[i] = saved - h;
      const double f_minus = f().item();
      vals[i] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double a = analytic[pi][i];
      const double rel = std::abs(a - numeric) /
                         std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace ggtvae
