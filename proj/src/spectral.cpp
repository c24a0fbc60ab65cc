#include "ggtvae/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace ggtvae {

namespace {

constexpr double kOffDiagTol = 1e-10;
constexpr double kSymTol = 1e-9;
constexpr double kReconTol = 1e-8;
constexpr int kMaxSweeps = 100;
constexpr double kZeroModeTol = 1e-8;
constexpr double kSignTol = 1e-9;

double max_offdiag(const std::vector<double>& a, std::size_t n) {
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      best = std::max(best, std::abs(a[i * n + j]));
  return best;
}

}  // namespace

EighResult eigh_symmetric(const Tensor& m) {
  if (m.rows() != m.cols()) throw DimError("eigh_symmetric: matrix not square");
  const std::size_t n = m.rows();
  auto mv = m.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(mv[i * n + j] - mv[j * n + i]) >= kSymTol)
        throw ValueError("eigh_symmetric: input not symmetric at (" +
                         std::to_string(i) + "," + std::to_string(j) + ")");
    }
  }

  std::vector<double> a(mv.begin(), mv.end());
  std::vector<double> q(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) q[i * n + i] = 1.0;

  int sweep = 0;
  while (max_offdiag(a, n) >= kOffDiagTol) {
    if (++sweep > kMaxSweeps)
      throw NumericError("eigh_symmetric: no convergence after " +
                         std::to_string(kMaxSweeps) + " sweeps");
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t qi = p + 1; qi < n; ++qi) {
        const double apq = a[p * n + qi];
        if (apq == 0.0) continue;
        const double tau = (a[qi * n + qi] - a[p * n + p]) / (2.0 * apq);
        double t;
        if (tau >= 0.0)
          t = 1.0 / (tau + std::sqrt(1.0 + tau * tau));
        else
          t = 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // A <- J^T A J with J the (p,q) rotation [[c,s],[-s,c]].
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + qi];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + qi] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[qi * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[qi * n + k] = s * apk + c * aqk;
        }
        a[p * n + qi] = 0.0;
        a[qi * n + p] = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double qkp = q[k * n + p];
          const double qkq = q[k * n + qi];
          q[k * n + p] = c * qkp - s * qkq;
          q[k * n + qi] = s * qkp + c * qkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const double ex = a[x * n + x];
    const double ey = a[y * n + y];
    if (ex != ey) return ex < ey;
    for (std::size_t k = 0; k < n; ++k) {
      if (q[k * n + x] != q[k * n + y]) return q[k * n + x] < q[k * n + y];
    }
    return false;
  });

  EighResult result;
  result.eigenvalues.resize(n);
  std::vector<double> vecs(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    result.eigenvalues[j] = a[order[j] * n + order[j]];
    for (std::size_t k = 0; k < n; ++k) vecs[k * n + j] = q[k * n + order[j]];
  }
  result.eigenvectors = Tensor::from_data(n, n, std::move(vecs));

  auto ev = result.eigenvectors.values();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        acc += ev[i * n + k] * result.eigenvalues[k] * ev[j * n + k];
      worst = std::max(worst, std::abs(acc - mv[i * n + j]));
    }
  }
  if (worst >= kReconTol)
    throw NumericError("eigh_symmetric: reconstruction residual " +
                       std::to_string(worst));
  return result;
}

PositionalEncoding laplacian_pe(const TrainAdjacency& adj, int k) {
  if (k >= adj.n)
    throw ValueError("laplacian_pe: k = " + std::to_string(k) +
                     " must be < N = " + std::to_string(adj.n));
  if (k < 1) throw ValueError("laplacian_pe: k must be >= 1");
  const std::size_t n = static_cast<std::size_t>(adj.n);
  const EighResult eig = eigh_symmetric(normalized_laplacian(adj));
  auto qv = eig.eigenvectors.values();

  PositionalEncoding pe;
  pe.requested_k = k;
  std::vector<double> out(n * static_cast<std::size_t>(k), 0.0);
  int col = 0;
  for (std::size_t j = 0; j < n && col < k; ++j) {
    if (eig.eigenvalues[j] < kZeroModeTol) continue;  // constant modes
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += qv[i * n + j] * qv[i * n + j];
    norm = std::sqrt(norm);
    double sign = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(qv[i * n + j]) > kSignTol) {
        sign = qv[i * n + j] > 0.0 ? 1.0 : -1.0;
        break;
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      out[i * static_cast<std::size_t>(k) + col] = sign * qv[i * n + j] / norm;
    pe.eigenvalues.push_back(eig.eigenvalues[j]);
    ++col;
  }
  pe.effective_k = col;
  if (col < k) {
    std::cerr << "warning: laplacian_pe found only " << col
              << " nonzero-eigenvalue columns for k=" << k
              << "; zero-padding the rest\n";
  }
  pe.vectors = Tensor::from_data(n, static_cast<std::size_t>(k),
                                 std::move(out));
  return pe;
}

void save_pe_cache(const PositionalEncoding& pe, const std::string& graph_hash,
                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  char buf[64];
  out << "# graph_hash=" << graph_hash << ",k=" << pe.requested_k
      << ",effective_k=" << pe.effective_k << '\n';
  out << "# eigenvalues=";
  for (int j = 0; j < pe.effective_k; ++j) {
    std::snprintf(buf, sizeof(buf), "%.17g", pe.eigenvalues[j]);
    out << (j ? " " : "") << buf;
  }
  out << '\n';
  out << "node_id";
  for (int j = 1; j <= pe.requested_k; ++j) out << ",p_" << j;
  out << '\n';
  auto pv = pe.vectors.values();
  const std::size_t n = pe.vectors.rows();
  const std::size_t k = pe.vectors.cols();
  for (std::size_t i = 0; i < n; ++i) {
    out << i;
    for (std::size_t j = 0; j < k; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", pv[i * k + j]);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

std::optional<PositionalEncoding> load_pe_cache(const std::string& path,
                                                const std::string& graph_hash,
                                                int k) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty cache");
  const std::string want =
      "# graph_hash=" + graph_hash + ",k=" + std::to_string(k) + ",";
  if (line.rfind(want, 0) != 0) return std::nullopt;  // other key: cache miss

  PositionalEncoding pe;
  pe.requested_k = k;
  pe.effective_k = std::stoi(line.substr(line.rfind('=') + 1));

  if (!std::getline(in, line) || line.rfind("# eigenvalues=", 0) != 0)
    throw ParseError(path + ": missing eigenvalue line");
  std::istringstream evs(line.substr(std::string("# eigenvalues=").size()));
  double v;
  while (evs >> v) pe.eigenvalues.push_back(v);
  if (static_cast<int>(pe.eigenvalues.size()) != pe.effective_k)
    throw ParseError(path + ": eigenvalue count mismatch");

  if (!std::getline(in, line) || line.rfind("node_id", 0) != 0)
    throw ParseError(path + ": missing column header");

  std::vector<double> data;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    if (!std::getline(row, cell, ',')) throw ParseError(path + ": bad row");
    if (std::stoull(cell) != n)
      throw ParseError(path + ": node ids not dense/ordered");
    int got = 0;
    while (std::getline(row, cell, ',')) {
      data.push_back(std::stod(cell));
      ++got;
    }
    if (got != k) throw ParseError(path + ": wrong column count");
    ++n;
  }
  if (n == 0) throw ParseError(path + ": no data rows");
  pe.vectors = Tensor::from_data(n, static_cast<std::size_t>(k),
                                 std::move(data));
  return pe;
}

}  // namespace ggtvae
