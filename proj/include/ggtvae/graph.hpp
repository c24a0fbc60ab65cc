#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ggtvae/tensor.hpp"

namespace ggtvae {

// Undirected edge, stored canonically with u < v.
struct Edge {
  int u = 0;
  int v = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline Edge make_edge(int a, int b) {
  return a < b ? Edge{a, b} : Edge{b, a};
}

struct Graph {
  int n = 0;
  Tensor features;            // n x d_node
  std::vector<Edge> edges;    // sorted, unique, u < v
  std::vector<int> labels;    // empty, or one class id per node

  int d_node() const { return static_cast<int>(features.cols()); }
  bool has_labels() const { return !labels.empty(); }
};

struct EdgeSplit {
  std::vector<Edge> train_pos;
  std::vector<Edge> val_pos;
  std::vector<Edge> test_pos;
  std::vector<Edge> val_neg;
  std::vector<Edge> test_neg;
  std::uint64_t seed = 0;
};

// Adjacency over training edges only; the substrate for PEs, SPDs and the
// diameter. Conceptually the dense 0/1 matrix A; stored as neighbor lists.
struct TrainAdjacency {
  int n = 0;
  std::vector<Edge> edges;
  std::vector<std::vector<int>> neighbors;  // sorted per node

  static TrainAdjacency from_edges(int n, const std::vector<Edge>& edges);
  bool has_edge(int u, int v) const;
};

// TSV ingestion. nodes.tsv: `<id>\t<f_1>..<f_d>` with ids dense 0..N-1 and an
// optional trailing label column enabled by a `#labels` header line.
// edges.tsv: `<u>\t<v>`. Reversed duplicates are merged; self-loops rejected.
Graph load_graph(const std::string& nodes_path, const std::string& edges_path);

// Uniform partition of the edge set into train/val/test positives (counts
// rounded down, remainder to train) with balanced sampled negatives.
// Deterministic for a fixed seed. Graphs with fewer than 10 edges error.
EdgeSplit split_edges(const Graph& g, double val_frac, double test_frac,
                      std::uint64_t seed);

// Uniform sample of `count` node pairs (u < v) that are not edges of g, not
// self-loops, and not in `exclude`, without replacement.
std::vector<Edge> sample_negatives(const Graph& g, std::size_t count,
                                   const std::vector<Edge>& exclude,
                                   std::uint64_t seed);

inline constexpr int kUnreachable = -1;

// Exact unweighted shortest-path distances from `source`; kUnreachable for
// nodes in other components.
std::vector<int> bfs_spd(const TrainAdjacency& adj, int source);

// Maximum finite SPD over the largest connected component.
int diameter(const TrainAdjacency& adj);

// L = I - D^{-1/2} A D^{-1/2}; isolated nodes get L_ii = 1 with zero
// off-diagonals.
Tensor normalized_laplacian(const TrainAdjacency& adj);

// Split (de)serialization, schema:
// {"seed":..,"train_pos":[[u,v],..],"val_pos":..,"val_neg":..,
//  "test_pos":..,"test_neg":..}
void save_split(const EdgeSplit& split, const std::string& path);
EdgeSplit load_split(const std::string& path);

// FNV-1a over the canonical content (n, feature bits, edges, labels).
std::string graph_hash(const Graph& g);

// FNV-1a over (n, edges) only — the key for caches that depend purely on
// training-graph structure (positional encodings).
std::string adjacency_hash(const TrainAdjacency& adj);

}  // namespace ggtvae
