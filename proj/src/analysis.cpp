#include "ggtvae/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

namespace ggtvae {

AttentionByDistance attention_by_distance(const AttentionRecord& attn,
                                          const TrainAdjacency& adj) {
  if (attn.probs.empty() || attn.probs[0].empty())
    throw ValueError("attention_by_distance: empty attention record");
  AttentionByDistance abd;
  abd.layers = static_cast<int>(attn.probs.size());
  abd.heads = static_cast<int>(attn.probs[0].size());
  abd.d_graph = diameter(adj);
  const std::size_t n = static_cast<std::size_t>(adj.n);
  for (const auto& layer : attn.probs) {
    if (static_cast<int>(layer.size()) != abd.heads)
      throw DimError("attention_by_distance: ragged head count");
    for (const Tensor& a : layer) {
      if (a.rows() != n || a.cols() != n)
        throw DimError("attention_by_distance: attention is " +
                       std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()) + " but graph has " +
                       std::to_string(n) + " nodes");
    }
  }

  std::vector<std::vector<int>> spd(n);
  std::map<int, std::size_t> count_by_d;
  for (std::size_t u = 0; u < n; ++u) {
    spd[u] = bfs_spd(adj, static_cast<int>(u));
    for (int d : spd[u])
      if (d != kUnreachable) ++count_by_d[d];
  }
  for (const auto& [d, c] : count_by_d) {
    abd.distances.push_back(d);
    abd.pair_counts.push_back(c);
  }

  abd.mean_attention.resize(abd.layers);
  for (int l = 0; l < abd.layers; ++l) {
    abd.mean_attention[l].resize(abd.heads);
    for (int h = 0; h < abd.heads; ++h) {
      auto av = attn.probs[l][h].values();
      std::map<int, double> sum_by_d;
      for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = 0; v < n; ++v)
          if (spd[u][v] != kUnreachable) sum_by_d[spd[u][v]] += av[u * n + v];
      auto& means = abd.mean_attention[l][h];
      means.reserve(abd.distances.size());
      for (std::size_t i = 0; i < abd.distances.size(); ++i) {
        means.push_back(sum_by_d[abd.distances[i]] /
                        static_cast<double>(abd.pair_counts[i]));
      }
    }
  }
  return abd;
}

GlobalityReport globality(const AttentionByDistance& abd, bool exclude_self) {
  if (abd.d_graph < 1)
    throw ValueError("globality: graph diameter must be >= 1");
  GlobalityReport report;
  report.d_graph = abd.d_graph;
  report.globality.resize(abd.layers);
  report.normalized.resize(abd.layers);
  for (int l = 0; l < abd.layers; ++l) {
    double layer_sum = 0.0;
    double layer_norm_sum = 0.0;
    for (int h = 0; h < abd.heads; ++h) {
      double num = 0.0;
      double den = 0.0;
      for (std::size_t i = 0; i < abd.distances.size(); ++i) {
        if (exclude_self && abd.distances[i] == 0) continue;
        num += abd.distances[i] * abd.mean_attention[l][h][i];
        den += abd.mean_attention[l][h][i];
      }
      if (den <= 0.0)
        throw ValueError("globality: zero total mean attention at layer " +
                         std::to_string(l) + " head " + std::to_string(h));
      const double g = num / den;
      report.globality[l].push_back(g);
      report.normalized[l].push_back(g / abd.d_graph);
      layer_sum += g;
      layer_norm_sum += g / abd.d_graph;
    }
    report.layer_globality.push_back(layer_sum / abd.heads);
    report.layer_normalized.push_back(layer_norm_sum / abd.heads);
  }
  return report;
}

void export_latents(const Tensor& mu, const std::vector<int>& labels,
                    const std::string& path) {
  if (!labels.empty() && labels.size() != mu.rows())
    throw DimError("export_latents: label count != node count");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "node_id,label";
  for (std::size_t j = 1; j <= mu.cols(); ++j) out << ",z_" << j;
  out << '\n';
  auto mv = mu.values();
  char buf[64];
  for (std::size_t i = 0; i < mu.rows(); ++i) {
    out << i << ',';
    if (!labels.empty()) out << labels[i];
    for (std::size_t j = 0; j < mu.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", mv[i * mu.cols() + j]);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

void export_analysis(const AttentionByDistance& abd,
                     const GlobalityReport& report,
                     const std::string& spd_csv_path,
                     const std::string& globality_csv_path) {
  char buf[64];
  {
    std::ofstream out(spd_csv_path);
    if (!out) throw IoError("cannot write " + spd_csv_path);
    out << "layer,head,spd,mean_attention,pair_count\n";
    for (int l = 0; l < abd.layers; ++l) {
      for (int h = 0; h < abd.heads; ++h) {
        for (std::size_t i = 0; i < abd.distances.size(); ++i) {
          std::snprintf(buf, sizeof(buf), "%.17g",
                        abd.mean_attention[l][h][i]);
          out << l << ',' << h << ',' << abd.distances[i] << ',' << buf << ','
              << abd.pair_counts[i] << '\n';
        }
      }
    }
    if (!out) throw IoError("write failed for " + spd_csv_path);
  }
  {
    std::ofstream out(globality_csv_path);
    if (!out) throw IoError("cannot write " + globality_csv_path);
    out << "layer,head,globality,normalized_globality\n";
    for (std::size_t l = 0; l < report.globality.size(); ++l) {
      for (std::size_t h = 0; h < report.globality[l].size(); ++h) {
        std::snprintf(buf, sizeof(buf), "%.17g", report.globality[l][h]);
        out << l << ',' << h << ',' << buf;
        std::snprintf(buf, sizeof(buf), "%.17g", report.normalized[l][h]);
        out << ',' << buf << '\n';
      }
      std::snprintf(buf, sizeof(buf), "%.17g", report.layer_globality[l]);
      out << l << ",avg," << buf;
      std::snprintf(buf, sizeof(buf), "%.17g", report.layer_normalized[l]);
      out << ',' << buf << '\n';
    }
    if (!out) throw IoError("write failed for " + globality_csv_path);
  }
}

}  // namespace ggtvae
