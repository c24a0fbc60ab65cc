#include "ggtvae/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "ggtvae/rng.hpp"

namespace ggtvae {

namespace {

std::uint64_t pair_key(int u, int v, int n) {
  return static_cast<std::uint64_t>(u) * static_cast<std::uint64_t>(n) +
         static_cast<std::uint64_t>(v);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

[[noreturn]] void parse_fail(const std::string& path, int line_no,
                             const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line_no) + ": " + what);
}

double parse_real(const std::string& s, const std::string& path, int line_no) {
  try {
    std::size_t consumed = 0;
    const double v = std::stod(s, &consumed);
    if (consumed != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    parse_fail(path, line_no, "not a number: '" + s + "'");
  }
}

int parse_int(const std::string& s, const std::string& path, int line_no) {
  try {
    std::size_t consumed = 0;
    const int v = std::stoi(s, &consumed);
    if (consumed != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    parse_fail(path, line_no, "not an integer: '" + s + "'");
  }
}

}  // namespace

TrainAdjacency TrainAdjacency::from_edges(int n,
                                          const std::vector<Edge>& edges) {
  TrainAdjacency adj;
  adj.n = n;
  adj.edges = edges;
  std::sort(adj.edges.begin(), adj.edges.end());
  adj.edges.erase(std::unique(adj.edges.begin(), adj.edges.end()),
                  adj.edges.end());
  adj.neighbors.assign(static_cast<std::size_t>(n), {});
  for (const Edge& e : adj.edges) {
    if (e.u < 0 || e.v >= n || e.u >= e.v) {
      throw ValueError("TrainAdjacency: invalid edge (" + std::to_string(e.u) +
                       "," + std::to_string(e.v) + ")");
    }
    adj.neighbors[e.u].push_back(e.v);
    adj.neighbors[e.v].push_back(e.u);
  }
  for (auto& nb : adj.neighbors) std::sort(nb.begin(), nb.end());
  return adj;
}

bool TrainAdjacency::has_edge(int u, int v) const {
  if (u == v) return false;
  const auto& nb = neighbors[u];
  return std::binary_search(nb.begin(), nb.end(), v);
}

Graph load_graph(const std::string& nodes_path,
                 const std::string& edges_path) {
  std::ifstream nodes_in(nodes_path);
  if (!nodes_in) throw IoError("cannot open " + nodes_path);

  bool has_labels = false;
  struct Row {
    int id;
    std::vector<double> feats;
    int label;
  };
  std::vector<Row> rows;
  int d_node = -1;
  std::string line;
  int line_no = 0;
  bool seen_data = false;
  while (std::getline(nodes_in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line == "#labels") {
        if (seen_data)
          parse_fail(nodes_path, line_no, "#labels must precede data rows");
        has_labels = true;
      }
      continue;
    }
    seen_data = true;
    auto fields = split_tabs(line);
    const int min_fields = has_labels ? 3 : 2;
    if (static_cast<int>(fields.size()) < min_fields)
      parse_fail(nodes_path, line_no, "too few columns");
    Row row;
    row.id = parse_int(fields[0], nodes_path, line_no);
    const std::size_t feat_end = has_labels ? fields.size() - 1 : fields.size();
    for (std::size_t i = 1; i < feat_end; ++i)
      row.feats.push_back(parse_real(fields[i], nodes_path, line_no));
    row.label = has_labels
                    ? parse_int(fields.back(), nodes_path, line_no)
                    : 0;
    if (d_node < 0) {
      d_node = static_cast<int>(row.feats.size());
      if (d_node == 0) parse_fail(nodes_path, line_no, "no feature columns");
    } else if (static_cast<int>(row.feats.size()) != d_node) {
      parse_fail(nodes_path, line_no,
                 "expected " + std::to_string(d_node) + " features, got " +
                     std::to_string(row.feats.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(nodes_path + ": no node rows");

  const int n = static_cast<int>(rows.size());
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::vector<double> feat_data(static_cast<std::size_t>(n) * d_node);
  std::vector<int> labels(has_labels ? n : 0);
  for (const Row& row : rows) {
    if (row.id < 0 || row.id >= n)
      throw ParseError(nodes_path + ": node id " + std::to_string(row.id) +
                       " out of dense range 0.." + std::to_string(n - 1));
    if (seen[row.id])
      throw ParseError(nodes_path + ": duplicate node id " +
                       std::to_string(row.id));
    seen[row.id] = true;
    std::copy(row.feats.begin(), row.feats.end(),
              feat_data.begin() + static_cast<std::size_t>(row.id) * d_node);
    if (has_labels) labels[row.id] = row.label;
  }

  Graph g;
  g.n = n;
  g.features = Tensor::from_data(static_cast<std::size_t>(n),
                                 static_cast<std::size_t>(d_node),
                                 std::move(feat_data));
  g.labels = std::move(labels);

  std::ifstream edges_in(edges_path);
  if (!edges_in) throw IoError("cannot open " + edges_path);
  std::vector<Edge> edges;
  line_no = 0;
  while (std::getline(edges_in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_tabs(line);
    if (fields.size() != 2) parse_fail(edges_path, line_no, "expected `u\\tv`");
    const int u = parse_int(fields[0], edges_path, line_no);
    const int v = parse_int(fields[1], edges_path, line_no);
    if (u < 0 || u >= n || v < 0 || v >= n)
      parse_fail(edges_path, line_no, "node id out of range");
    if (u == v) parse_fail(edges_path, line_no, "self-loop rejected");
    edges.push_back(make_edge(u, v));
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  g.edges = std::move(edges);
  return g;
}

std::vector<Edge> sample_negatives(const Graph& g, std::size_t count,
                                   const std::vector<Edge>& exclude,
                                   std::uint64_t seed) {
  const int n = g.n;
  std::unordered_set<std::uint64_t> taboo;
  taboo.reserve(g.edges.size() + exclude.size());
  for (const Edge& e : g.edges) taboo.insert(pair_key(e.u, e.v, n));
  for (const Edge& e : exclude) taboo.insert(pair_key(e.u, e.v, n));
  const std::uint64_t total_pairs =
      static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t available = total_pairs - taboo.size();
  if (count > available) {
    throw ValueError("sample_negatives: requested " + std::to_string(count) +
                     " but only " + std::to_string(available) +
                     " non-edges available");
  }

  Rng rng(seed);
  std::vector<Edge> out;
  out.reserve(count);
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(count);
  std::uint64_t attempts = 0;
  const std::uint64_t max_attempts = 60 * count + 10000;
  while (out.size() < count && attempts < max_attempts) {
    ++attempts;
    const int a = static_cast<int>(rng.uniform_int(n));
    const int b = static_cast<int>(rng.uniform_int(n));
    if (a == b) continue;
    const Edge e = make_edge(a, b);
    const std::uint64_t key = pair_key(e.u, e.v, n);
    if (taboo.count(key) || chosen.count(key)) continue;
    chosen.insert(key);
    out.push_back(e);
  }
  if (out.size() < count) {
    // Dense graph: enumerate the remaining candidates and draw directly.
    std::vector<Edge> candidates;
    for (int u = 0; u < n; ++u) {
      for (int v = u + 1; v < n; ++v) {
        const std::uint64_t key = pair_key(u, v, n);
        if (!taboo.count(key) && !chosen.count(key))
          candidates.push_back({u, v});
      }
    }
    while (out.size() < count) {
      const std::size_t pick = rng.uniform_int(candidates.size());
      out.push_back(candidates[pick]);
      candidates[pick] = candidates.back();
      candidates.pop_back();
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

EdgeSplit split_edges(const Graph& g, double val_frac, double test_frac,
                      std::uint64_t seed) {
  if (val_frac < 0.0 || test_frac < 0.0 || val_frac + test_frac >= 1.0)
    throw ValueError("split_edges: fractions must be nonnegative and sum < 1");
  if (g.edges.size() < 10)
    throw ValueError("split_edges: graph has fewer than 10 edges");

  std::vector<Edge> shuffled = g.edges;
  Rng rng(derive_seed(seed, 0));
  for (std::size_t i = shuffled.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_int(i);
    std::swap(shuffled[i - 1], shuffled[j]);
  }
  const std::size_t e = shuffled.size();
  const std::size_t n_val = static_cast<std::size_t>(
      std::floor(val_frac * static_cast<double>(e)));
  const std::size_t n_test = static_cast<std::size_t>(
      std::floor(test_frac * static_cast<double>(e)));

  EdgeSplit split;
  split.seed = seed;
  split.val_pos.assign(shuffled.begin(), shuffled.begin() + n_val);
  split.test_pos.assign(shuffled.begin() + n_val,
                        shuffled.begin() + n_val + n_test);
  split.train_pos.assign(shuffled.begin() + n_val + n_test, shuffled.end());
  std::sort(split.val_pos.begin(), split.val_pos.end());
  std::sort(split.test_pos.begin(), split.test_pos.end());
  std::sort(split.train_pos.begin(), split.train_pos.end());

  split.val_neg =
      sample_negatives(g, n_val, {}, derive_seed(seed, streams::kValNeg));
  split.test_neg = sample_negatives(g, n_test, split.val_neg,
                                    derive_seed(seed, streams::kTestNeg));
  return split;
}

std::vector<int> bfs_spd(const TrainAdjacency& adj, int source) {
  if (source < 0 || source >= adj.n)
    throw ValueError("bfs_spd: source out of range");
  std::vector<int> dist(static_cast<std::size_t>(adj.n), kUnreachable);
  std::deque<int> queue;
  dist[source] = 0;
  queue.push_back(source);
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : adj.neighbors[u]) {
      if (dist[v] == kUnreachable) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

int diameter(const TrainAdjacency& adj) {
  if (adj.edges.empty())
    throw ValueError("diameter: undefined for an edgeless graph");
  // Largest component, ties to the lowest-id root.
  std::vector<int> comp(static_cast<std::size_t>(adj.n), -1);
  int n_comp = 0;
  std::vector<int> comp_size;
  for (int s = 0; s < adj.n; ++s) {
    if (comp[s] != -1) continue;
    const int c = n_comp++;
    comp_size.push_back(0);
    std::deque<int> queue{s};
    comp[s] = c;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      ++comp_size[c];
      for (int v : adj.neighbors[u]) {
        if (comp[v] == -1) {
          comp[v] = c;
          queue.push_back(v);
        }
      }
    }
  }
  int largest = 0;
  for (int c = 1; c < n_comp; ++c)
    if (comp_size[c] > comp_size[largest]) largest = c;

  int best = 0;
  for (int s = 0; s < adj.n; ++s) {
    if (comp[s] != largest) continue;
    const auto dist = bfs_spd(adj, s);
    for (int v = 0; v < adj.n; ++v)
      if (dist[v] != kUnreachable) best = std::max(best, dist[v]);
  }
  return best;
}

Tensor normalized_laplacian(const TrainAdjacency& adj) {
  const int n = adj.n;
  std::vector<double> inv_sqrt_deg(static_cast<std::size_t>(n), 0.0);
  for (int u = 0; u < n; ++u) {
    const double deg = static_cast<double>(adj.neighbors[u].size());
    if (deg > 0.0) inv_sqrt_deg[u] = 1.0 / std::sqrt(deg);
  }
  Tensor lap(static_cast<std::size_t>(n), static_cast<std::size_t>(n), 0.0);
  auto lv = lap.values();
  for (int u = 0; u < n; ++u) lv[static_cast<std::size_t>(u) * n + u] = 1.0;
  for (const Edge& e : adj.edges) {
    const double w = -inv_sqrt_deg[e.u] * inv_sqrt_deg[e.v];
    lv[static_cast<std::size_t>(e.u) * n + e.v] = w;
    lv[static_cast<std::size_t>(e.v) * n + e.u] = w;
  }
  return lap;
}

namespace {

nlohmann::json edges_to_json(const std::vector<Edge>& edges) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Edge& e : edges) arr.push_back({e.u, e.v});
  return arr;
}

std::vector<Edge> edges_from_json(const nlohmann::json& arr,
                                  const std::string& field) {
  if (!arr.is_array()) throw ParseError("split: '" + field + "' not an array");
  std::vector<Edge> edges;
  edges.reserve(arr.size());
  for (const auto& item : arr) {
    if (!item.is_array() || item.size() != 2)
      throw ParseError("split: bad pair in '" + field + "'");
    edges.push_back(make_edge(item[0].get<int>(), item[1].get<int>()));
  }
  return edges;
}

}  // namespace

void save_split(const EdgeSplit& split, const std::string& path) {
  nlohmann::json doc;
  doc["seed"] = split.seed;
  doc["train_pos"] = edges_to_json(split.train_pos);
  doc["val_pos"] = edges_to_json(split.val_pos);
  doc["val_neg"] = edges_to_json(split.val_neg);
  doc["test_pos"] = edges_to_json(split.test_pos);
  doc["test_neg"] = edges_to_json(split.test_neg);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << doc.dump() << '\n';
}

EdgeSplit load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  EdgeSplit split;
  try {
    split.seed = doc.at("seed").get<std::uint64_t>();
    split.train_pos = edges_from_json(doc.at("train_pos"), "train_pos");
    split.val_pos = edges_from_json(doc.at("val_pos"), "val_pos");
    split.val_neg = edges_from_json(doc.at("val_neg"), "val_neg");
    split.test_pos = edges_from_json(doc.at("test_pos"), "test_pos");
    split.test_neg = edges_from_json(doc.at("test_neg"), "test_neg");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return split;
}

namespace {

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void mix(const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(h));
    return std::string(buf);
  }
};

}  // namespace

std::string graph_hash(const Graph& g) {
  Fnv1a f;
  const std::int64_t n = g.n;
  const std::int64_t d = g.d_node();
  f.mix(&n, sizeof(n));
  f.mix(&d, sizeof(d));
  auto fv = g.features.values();
  f.mix(fv.data(), fv.size() * sizeof(double));
  for (const Edge& e : g.edges) {
    f.mix(&e.u, sizeof(e.u));
    f.mix(&e.v, sizeof(e.v));
  }
  for (int label : g.labels) f.mix(&label, sizeof(label));
  return f.hex();
}

std::string adjacency_hash(const TrainAdjacency& adj) {
  Fnv1a f;
  const std::int64_t n = adj.n;
  f.mix(&n, sizeof(n));
  for (const Edge& e : adj.edges) {
    f.mix(&e.u, sizeof(e.u));
    f.mix(&e.v, sizeof(e.v));
  }
  return f.hex();
}

}  // namespace ggtvae
