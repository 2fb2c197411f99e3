#include "surgfutr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace surgfutr {

double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("average_precision size mismatch");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  double positives_seen = 0.0;
  double ap = 0.0;
  std::size_t rank = 0;
  for (std::size_t i : order) {
    ++rank;
    if (labels[i]) {
      positives_seen += 1.0;
      ap += positives_seen / static_cast<double>(rank);
    }
  }
  return positives_seen > 0.0 ? ap / positives_seen : 0.0;
}

double f1_for_state(const std::vector<int>& predicted, const std::vector<int>& truth,
                    int state) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument("f1_for_state size mismatch");
  }
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == state;
    const bool t = truth[i] == state;
    if (p && t) tp += 1.0;
    else if (p) fp += 1.0;
    else if (t) fn += 1.0;
  }
  const double denom = 2.0 * tp + fp + fn;
  return denom > 0.0 ? 2.0 * tp / denom : 0.0;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size() || predicted.empty()) {
    throw std::invalid_argument("accuracy size mismatch");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == truth[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double mean_absolute_error(const std::vector<double>& predicted,
                           const std::vector<double>& truth) {
  if (predicted.size() != truth.size() || predicted.empty()) {
    throw std::invalid_argument("mean_absolute_error size mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    total += std::abs(predicted[i] - truth[i]);
  }
  return total / static_cast<double>(predicted.size());
}

}  // namespace surgfutr
