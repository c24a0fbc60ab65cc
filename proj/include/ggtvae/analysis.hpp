#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ggtvae/graph.hpp"
#include "ggtvae/model.hpp"

namespace ggtvae {

struct AttentionByDistance {
  int layers = 0;
  int heads = 0;
  int d_graph = 0;                       // diameter of the training graph
  std::vector<int> distances;            // realized finite SPDs, ascending
  std::vector<std::size_t> pair_counts;  // ordered pairs per distance
  // mean_attention[layer][head][i] pairs with distances[i].
  std::vector<std::vector<std::vector<double>>> mean_attention;
};

struct GlobalityReport {
  int d_graph = 0;
  std::vector<std::vector<double>> globality;   // [layer][head], hop units
  std::vector<std::vector<double>> normalized;  // globality / d_graph
  std::vector<double> layer_globality;          // head-averaged
  std::vector<double> layer_normalized;
};

// Mean attention weight over all ordered node pairs at each shortest-path
// distance (d = 0 included, unreachable pairs excluded). SPDs come from the
// training adjacency only.
AttentionByDistance attention_by_distance(const AttentionRecord& attn,
                                          const TrainAdjacency& adj);

// Globality = sum_d d*abar(d) / sum_d abar(d); normalized divides by the
// graph diameter. exclude_self drops the d = 0 bucket from both sums.
GlobalityReport globality(const AttentionByDistance& abd,
                          bool exclude_self = false);

// CSV `node_id,label,z_1..z_k`; label column empty when labels is empty.
void export_latents(const Tensor& mu, const std::vector<int>& labels,
                    const std::string& path);

// attention_by_spd.csv: layer,head,spd,mean_attention,pair_count
// globality.csv: layer,head,globality,normalized_globality (+ avg rows)
void export_analysis(const AttentionByDistance& abd,
                     const GlobalityReport& report,
                     const std::string& spd_csv_path,
                     const std::string& globality_csv_path);

}  // namespace ggtvae
