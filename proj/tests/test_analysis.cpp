#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ggtvae/analysis.hpp"
#include "ggtvae/common.hpp"
#include "ggtvae/graph.hpp"
#include "ggtvae/model.hpp"
#include "ggtvae/rng.hpp"
#include "test_util.hpp"

using namespace ggtvae;
using namespace testutil;

namespace {

AttentionRecord record_of(const std::vector<std::vector<Tensor>>& probs) {
  AttentionRecord r;
  r.probs = probs;
  return r;
}

Tensor uniform_attention(int n) {
  return Tensor(n, n, 1.0 / static_cast<double>(n));
}

Tensor identity_attention(int n) {
  Tensor t(n, n);
  for (int i = 0; i < n; ++i) t.values()[i * n + i] = 1.0;
  return t;
}

// independent O(L*H*N^2) re-computation with explicit loops and maps
struct OracleResult {
  std::map<int, double> mean_by_d;
  std::map<int, std::size_t> count_by_d;
  double globality = 0.0;
};

OracleResult oracle_abd(const Tensor& attn, const TrainAdjacency& adj,
                        bool exclude_self) {
  OracleResult out;
  std::map<int, double> sum_by_d;
  for (int u = 0; u < adj.n; ++u) {
    std::vector<int> d = bfs_spd(adj, u);
    for (int v = 0; v < adj.n; ++v) {
      if (d[v] == kUnreachable) continue;
      sum_by_d[d[v]] += attn.at(u, v);
      out.count_by_d[d[v]] += 1;
    }
  }
  double num = 0.0, den = 0.0;
  for (auto& [dist, total] : sum_by_d) {
    const double mean = total / static_cast<double>(out.count_by_d[dist]);
    out.mean_by_d[dist] = mean;
    if (exclude_self && dist == 0) continue;
    num += dist * mean;
    den += mean;
  }
  out.globality = num / den;
  return out;
}

}  // namespace

TEST_CASE("attention_by_distance: path graph with uniform attention") {
  TrainAdjacency p3 = TrainAdjacency::from_edges(3, {{0, 1}, {1, 2}});
  AttentionRecord rec = record_of({{uniform_attention(3)}});
  AttentionByDistance abd = attention_by_distance(rec, p3);
  CHECK(abd.layers == 1);
  CHECK(abd.heads == 1);
  CHECK(abd.d_graph == 2);
  CHECK(abd.distances == std::vector<int>{0, 1, 2});
  CHECK(abd.pair_counts == std::vector<std::size_t>{3, 4, 2});
  for (double m : abd.mean_attention[0][0])
    CHECK(m == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  GlobalityReport rep = globality(abd);
  CHECK(rep.d_graph == 2);
  // uniform rows spread mass evenly: globality = mean realized distance = 1
  CHECK(rep.globality[0][0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.normalized[0][0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rep.layer_globality[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("globality: identity attention is purely local") {
  TrainAdjacency p4 =
      TrainAdjacency::from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
  AttentionRecord rec = record_of({{identity_attention(4)}});
  AttentionByDistance abd = attention_by_distance(rec, p4);
  GlobalityReport rep = globality(abd);
  CHECK(rep.globality[0][0] == 0.0);
  CHECK(rep.normalized[0][0] == 0.0);
  // with the self bucket excluded the measure degenerates: all remaining
  // buckets carry zero mass
  CHECK_THROWS_AS(globality(abd, /*exclude_self=*/true), ValueError);
}

TEST_CASE("attention_by_distance: triple-loop oracle on random inputs") {
  Rng rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 4 + static_cast<int>(rng.uniform_int(9));  // up to 12
    Graph g = sbm_graph({(n + 1) / 2, n / 2}, 0.5, 0.2, 500 + trial);
    TrainAdjacency adj = TrainAdjacency::from_edges(g.n, g.edges);
    if (g.edges.empty()) continue;
    const int layers = 2, heads = 2;
    std::vector<std::vector<Tensor>> probs(layers);
    for (int l = 0; l < layers; ++l)
      for (int h = 0; h < heads; ++h)
        probs[l].push_back(random_row_stochastic(g.n, rng));
    AttentionByDistance abd = attention_by_distance(record_of(probs), adj);
    GlobalityReport rep = globality(abd);
    for (int l = 0; l < layers; ++l)
      for (int h = 0; h < heads; ++h) {
        OracleResult want = oracle_abd(probs[l][h], adj, false);
        REQUIRE(abd.distances.size() == want.mean_by_d.size());
        for (std::size_t i = 0; i < abd.distances.size(); ++i) {
          const int d = abd.distances[i];
          CHECK(abd.pair_counts[i] == want.count_by_d[d]);
          CHECK(std::abs(abd.mean_attention[l][h][i] - want.mean_by_d[d]) <
                1e-12);
        }
        CHECK(std::abs(rep.globality[l][h] - want.globality) < 1e-12);
        CHECK(rep.normalized[l][h] ==
              doctest::Approx(want.globality / abd.d_graph).epsilon(1e-12));
        CHECK(rep.normalized[l][h] >= 0.0);
        CHECK(rep.normalized[l][h] <= 1.0);
      }
    // head-average rows
    for (int l = 0; l < layers; ++l) {
      double mean = 0.0;
      for (int h = 0; h < heads; ++h) mean += rep.globality[l][h];
      mean /= heads;
      CHECK(rep.layer_globality[l] == doctest::Approx(mean).epsilon(1e-12));
    }
  }
}

TEST_CASE("attention_by_distance: unreachable pairs never enter the sums") {
  // two components: 0-1 and 2-3; cross pairs must be excluded
  TrainAdjacency adj = TrainAdjacency::from_edges(4, {{0, 1}, {2, 3}});
  Rng rng(73);
  Tensor attn = random_row_stochastic(4, rng);
  AttentionByDistance abd = attention_by_distance(record_of({{attn}}), adj);
  CHECK(abd.distances == std::vector<int>{0, 1});
  CHECK(abd.pair_counts == std::vector<std::size_t>{4, 4});
  double want_d1 = (attn.at(0, 1) + attn.at(1, 0) + attn.at(2, 3) +
                    attn.at(3, 2)) /
                   4.0;
  CHECK(abd.mean_attention[0][0][1] == doctest::Approx(want_d1).epsilon(1e-15));
}

TEST_CASE("attention mass accounting on a connected graph") {
  // sum_d abar(d) * count(d) = total attention mass = N (rows sum to 1)
  Rng rng(79);
  Graph g = sbm_graph({6, 6}, 0.6, 0.3, 83);
  TrainAdjacency adj = TrainAdjacency::from_edges(g.n, g.edges);
  std::vector<int> d0 = bfs_spd(adj, 0);
  REQUIRE(std::none_of(d0.begin(), d0.end(),
                       [](int d) { return d == kUnreachable; }));
  Tensor attn = random_row_stochastic(g.n, rng);
  AttentionByDistance abd = attention_by_distance(record_of({{attn}}), adj);
  double mass = 0.0;
  for (std::size_t i = 0; i < abd.distances.size(); ++i)
    mass += abd.mean_attention[0][0][i] *
            static_cast<double>(abd.pair_counts[i]);
  CHECK(mass == doctest::Approx(static_cast<double>(g.n)).epsilon(1e-9));
}

TEST_CASE("attention_by_distance: relabeling invariance") {
  std::vector<Edge> edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}, {1, 3}};
  const int n = 5;
  TrainAdjacency adj = TrainAdjacency::from_edges(n, edges);
  Rng rng(89);
  Tensor attn = random_row_stochastic(n, rng);

  std::vector<int> perm = {2, 4, 0, 3, 1};
  std::vector<Edge> pedges;
  for (const Edge& e : edges) pedges.push_back(make_edge(perm[e.u], perm[e.v]));
  TrainAdjacency padj = TrainAdjacency::from_edges(n, pedges);
  Tensor pattn(n, n);
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      pattn.values()[perm[u] * n + perm[v]] = attn.at(u, v);

  AttentionByDistance a = attention_by_distance(record_of({{attn}}), adj);
  AttentionByDistance b = attention_by_distance(record_of({{pattn}}), padj);
  CHECK(a.distances == b.distances);
  CHECK(a.pair_counts == b.pair_counts);
  CHECK(a.d_graph == b.d_graph);
  for (std::size_t i = 0; i < a.distances.size(); ++i)
    CHECK(a.mean_attention[0][0][i] ==
          doctest::Approx(b.mean_attention[0][0][i]).epsilon(1e-12));
}

TEST_CASE("exclude_self shifts globality upward") {
  Rng rng(97);
  Graph g = sbm_graph({6, 6}, 0.5, 0.2, 101);
  TrainAdjacency adj = TrainAdjacency::from_edges(g.n, g.edges);
  Tensor attn = random_row_stochastic(g.n, rng);
  AttentionByDistance abd = attention_by_distance(record_of({{attn}}), adj);
  GlobalityReport with_self = globality(abd, false);
  GlobalityReport no_self = globality(abd, true);
  OracleResult want = oracle_abd(attn, adj, true);
  CHECK(std::abs(no_self.globality[0][0] - want.globality) < 1e-12);
  // dropping the d=0 bucket removes weight at distance zero
  CHECK(no_self.globality[0][0] > with_self.globality[0][0]);
}

TEST_CASE("attention_by_distance: shape and emptiness errors") {
  TrainAdjacency adj = TrainAdjacency::from_edges(3, {{0, 1}, {1, 2}});
  CHECK_THROWS_AS(
      attention_by_distance(record_of({{Tensor(4, 4, 0.25)}}), adj), DimError);
  CHECK_THROWS_AS(attention_by_distance(record_of({}), adj), ValueError);
  // ragged heads across layers
  std::vector<std::vector<Tensor>> ragged = {
      {uniform_attention(3), uniform_attention(3)}, {uniform_attention(3)}};
  CHECK_THROWS_AS(attention_by_distance(record_of(ragged), adj), DimError);
  // diameter undefined on an edgeless adjacency
  CHECK_THROWS_AS(
      attention_by_distance(record_of({{uniform_attention(3)}}),
                            TrainAdjacency::from_edges(3, {})),
      ValueError);
}

TEST_CASE("export_analysis: csv layout and avg-row arithmetic") {
  Rng rng(103);
  Graph g = sbm_graph({5, 5}, 0.8, 0.4, 107);
  TrainAdjacency adj = TrainAdjacency::from_edges(g.n, g.edges);
  std::vector<int> reach = bfs_spd(adj, 0);
  REQUIRE(std::none_of(reach.begin(), reach.end(),
                       [](int d) { return d == kUnreachable; }));
  const int layers = 2, heads = 2;
  std::vector<std::vector<Tensor>> probs(layers);
  for (int l = 0; l < layers; ++l)
    for (int h = 0; h < heads; ++h)
      probs[l].push_back(random_row_stochastic(g.n, rng));
  AttentionByDistance abd = attention_by_distance(record_of(probs), adj);
  GlobalityReport rep = globality(abd);

  const std::string dir = make_temp_dir();
  export_analysis(abd, rep, dir + "/attention_by_spd.csv",
                  dir + "/globality.csv");

  std::ifstream spd(dir + "/attention_by_spd.csv");
  std::string line;
  std::getline(spd, line);
  CHECK(line == "layer,head,spd,mean_attention,pair_count");
  std::size_t rows = 0;
  double mass_head0 = 0.0;
  while (std::getline(spd, line)) {
    ++rows;
    std::istringstream ss(line);
    std::string f;
    std::vector<std::string> fields;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    REQUIRE(fields.size() == 5);
    if (fields[0] == "0" && fields[1] == "0")
      mass_head0 += std::stod(fields[3]) * std::stod(fields[4]);
  }
  CHECK(rows == static_cast<std::size_t>(layers * heads) *
                    abd.distances.size());
  CHECK(mass_head0 == doctest::Approx(static_cast<double>(g.n)).epsilon(1e-9));

  std::ifstream glob(dir + "/globality.csv");
  std::getline(glob, line);
  CHECK(line == "layer,head,globality,normalized_globality");
  std::map<int, std::vector<double>> head_vals;
  std::map<int, double> avg_vals;
  while (std::getline(glob, line)) {
    std::istringstream ss(line);
    std::string layer_s, head_s, g_s, n_s;
    std::getline(ss, layer_s, ',');
    std::getline(ss, head_s, ',');
    std::getline(ss, g_s, ',');
    std::getline(ss, n_s, ',');
    if (head_s == "avg")
      avg_vals[std::stoi(layer_s)] = std::stod(g_s);
    else
      head_vals[std::stoi(layer_s)].push_back(std::stod(g_s));
    // normalized column consistent with the globality column
    CHECK(std::stod(n_s) ==
          doctest::Approx(std::stod(g_s) / abd.d_graph).epsilon(1e-9));
  }
  REQUIRE(avg_vals.size() == layers);
  for (auto& [l, heads_g] : head_vals) {
    REQUIRE(heads_g.size() == heads);
    double mean = (heads_g[0] + heads_g[1]) / 2.0;
    CHECK(avg_vals[l] == doctest::Approx(mean).epsilon(1e-9));
  }
}

TEST_CASE("export_latents: labeled and unlabeled layouts") {
  Tensor mu = Tensor::from_data(2, 3, {0.5, -1.25, 2.0, 0.0, 1.0, -3.5});
  const std::string dir = make_temp_dir();

  export_latents(mu, {4, 7}, dir + "/lat.csv");
  std::ifstream in(dir + "/lat.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "node_id,label,z_1,z_2,z_3");
  std::getline(in, line);
  CHECK(line == "0,4,0.5,-1.25,2");
  std::getline(in, line);
  CHECK(line == "1,7,0,1,-3.5");

  export_latents(mu, {}, dir + "/lat2.csv");
  std::ifstream in2(dir + "/lat2.csv");
  std::getline(in2, line);
  CHECK(line == "node_id,label,z_1,z_2,z_3");
  std::getline(in2, line);
  CHECK(line == "0,,0.5,-1.25,2");

  CHECK_THROWS_AS(export_latents(mu, {1}, dir + "/bad.csv"), DimError);
}
