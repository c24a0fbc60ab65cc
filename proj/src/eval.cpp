#include "ggtvae/eval.hpp"

#include <algorithm>
#include <numeric>

namespace ggtvae {

namespace {

void validate_scored(const ScoredEdges& s) {
  if (s.scores.size() != s.labels.size())
    throw ValueError("scored edges: scores/labels length mismatch");
  if (s.scores.empty()) throw ValueError("scored edges: empty input");
  std::size_t n_pos = 0;
  for (int l : s.labels) {
    if (l != 0 && l != 1) throw ValueError("scored edges: labels must be 0/1");
    n_pos += static_cast<std::size_t>(l);
  }
  if (n_pos == 0 || n_pos == s.labels.size())
    throw ValueError("metric undefined: only one class present");
}

std::vector<Edge> sorted_copy(std::vector<Edge> edges) {
  std::sort(edges.begin(), edges.end());
  return edges;
}

bool intersects(const std::vector<Edge>& a, const std::vector<Edge>& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j])
      ++i;
    else if (b[j] < a[i])
      ++j;
    else
      return true;
  }
  return false;
}

}  // namespace

double roc_auc(const ScoredEdges& s) {
  validate_scored(s);
  const std::size_t n = s.scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return s.scores[a] < s.scores[b];
  });

  // Average ranks over tie groups (1-based), then the Mann-Whitney statistic.
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && s.scores[idx[j + 1]] == s.scores[idx[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i + 1) +
                              static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
    i = j + 1;
  }

  double pos_rank_sum = 0.0;
  double n_pos = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (s.labels[k] == 1) {
      pos_rank_sum += rank[k];
      n_pos += 1.0;
    }
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  const double u = pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0;
  return u / (n_pos * n_neg);
}

double average_precision(const ScoredEdges& s) {
  validate_scored(s);
  const std::size_t n = s.scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return s.scores[a] > s.scores[b];
  });

  double hits = 0.0;
  double ap = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (s.labels[idx[k]] == 1) {
      hits += 1.0;
      ap += hits / static_cast<double>(k + 1);
    }
  }
  return ap / hits;
}

EvalMetrics evaluate_split(const ModelParams& params, const Tensor& features,
                           const Tensor& pe, const EdgeSplit& split,
                           SplitPart which) {
  const auto val_pos = sorted_copy(split.val_pos);
  const auto test_pos = sorted_copy(split.test_pos);
  const auto val_neg = sorted_copy(split.val_neg);
  const auto test_neg = sorted_copy(split.test_neg);
  if (intersects(val_pos, test_pos) || intersects(val_neg, test_neg) ||
      intersects(val_pos, val_neg) || intersects(test_pos, test_neg))
    throw ValueError("evaluate_split: split partitions are not disjoint");

  const auto& pos = which == SplitPart::kVal ? split.val_pos : split.test_pos;
  const auto& neg = which == SplitPart::kVal ? split.val_neg : split.test_neg;
  if (pos.empty() || neg.empty())
    throw ValueError("evaluate_split: empty partition");

  NoGradGuard guard;
  const ForwardOutput out = encode(features, pe, params, false);

  std::vector<Edge> pairs = pos;
  pairs.insert(pairs.end(), neg.begin(), neg.end());
  const Tensor probs = decode_pairs(out.mu, pairs);
  auto pv = probs.values();

  ScoredEdges scored;
  scored.scores.assign(pv.begin(), pv.end());
  scored.labels.assign(pos.size(), 1);
  scored.labels.resize(pairs.size(), 0);

  EvalMetrics m;
  m.auc = roc_auc(scored);
  m.ap = average_precision(scored);
  return m;
}

}  // namespace ggtvae
