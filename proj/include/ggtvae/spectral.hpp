#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ggtvae/graph.hpp"
#include "ggtvae/tensor.hpp"

namespace ggtvae {

struct EighResult {
  std::vector<double> eigenvalues;  // ascending
  Tensor eigenvectors;              // columns, orthonormal, paired with values
};

// Cyclic Jacobi on a symmetric matrix. Converged when every off-diagonal
// drops below 1e-10; gives up after 100 sweeps. The factorization is checked
// against the input (max |M - Q diag(w) Q^T| < 1e-8) before returning.
EighResult eigh_symmetric(const Tensor& m);

struct PositionalEncoding {
  Tensor vectors;                   // N x requested_k, zero-padded past effective_k
  std::vector<double> eigenvalues;  // size effective_k
  int requested_k = 0;
  int effective_k = 0;
};

// Eigenvectors of the normalized Laplacian with the k smallest nonzero
// eigenvalues (zero modes dropped), sign-canonicalized and unit-norm.
PositionalEncoding laplacian_pe(const TrainAdjacency& adj, int k);

void save_pe_cache(const PositionalEncoding& pe, const std::string& graph_hash,
                   const std::string& path);

// Returns nullopt when the cache was written for a different (graph, k) key.
std::optional<PositionalEncoding> load_pe_cache(const std::string& path,
                                                const std::string& graph_hash,
                                                int k);

}  // namespace ggtvae
