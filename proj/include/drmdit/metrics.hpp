#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "drmdit/error.hpp"

namespace drmdit {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
};

// Anomaly (label 1) is the positive class.
struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  bool precision_undefined = false;  // no predicted positives; precision reported as 0
  ConfusionCounts counts;
};

inline ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw ParameterError("metrics: " + std::to_string(predictions.size()) + " predictions vs " +
                         std::to_string(labels.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] != 0;
    const bool y = labels[i] != 0;
    if (p && y) ++c.tp;
    else if (p) ++c.fp;
    else if (y) ++c.fn;
    else ++c.tn;
  }
  return c;
}

inline Metrics metrics(std::span<const int> predictions, std::span<const int> labels) {
  const auto c = confusion(predictions, labels);
  if (c.total() == 0) throw ParameterError("metrics: empty input");
  Metrics m;
  m.counts = c;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  if (c.tp + c.fp == 0) {
    m.precision_undefined = true;
    m.precision = 0.0;
  } else {
    m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  }
  m.recall = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return m;
}

/// |score - center|: near (low) and far (high) anomalies both rank above
/// normals when center is the median training score.
inline std::vector<double> fold_scores(std::span<const double> scores, double center) {
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = std::abs(scores[i] - center);
  return out;
}

/// Mann-Whitney AUC of already-folded scores; ties count one half.
inline double auc(std::span<const double> ranked, std::span<const int> labels) {
  if (ranked.size() != labels.size()) throw ParameterError("auc: length mismatch");
  std::vector<std::size_t> idx(ranked.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return ranked[a] < ranked[b]; });
  double pos = 0.0;
  double neg = 0.0;
  for (int y : labels) (y != 0 ? pos : neg) += 1.0;
  if (pos == 0.0 || neg == 0.0) throw MetricError("auc: both classes must be present");
  // Sum of midranks of the positives.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && ranked[idx[j + 1]] == ranked[idx[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[idx[k]] != 0) rank_sum += midrank;
    i = j + 1;
  }
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

}  // namespace drmdit
