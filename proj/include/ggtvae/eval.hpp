#pragma once

#include <vector>

#include "ggtvae/graph.hpp"
#include "ggtvae/model.hpp"

namespace ggtvae {

struct ScoredEdges {
  std::vector<double> scores;
  std::vector<int> labels;  // 0 or 1
};

// Probability that a random positive outscores a random negative, ties
// counted 1/2 (Mann-Whitney U via average ranks, O(n log n)).
double roc_auc(const ScoredEdges& s);

// Area under the precision-recall steps over the descending-score ranking;
// equal scores keep their original order (stable sort).
double average_precision(const ScoredEdges& s);

enum class SplitPart { kVal, kTest };

struct EvalMetrics {
  double auc = 0.0;
  double ap = 0.0;
};

// Scores the stored positive/negative edges of one partition with Z = mu
// (deterministic, no sampling) and returns both ranking metrics.
EvalMetrics evaluate_split(const ModelParams& params, const Tensor& features,
                           const Tensor& pe, const EdgeSplit& split,
                           SplitPart which);

}  // namespace ggtvae
