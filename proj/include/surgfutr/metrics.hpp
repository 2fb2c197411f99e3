#pragma once

#include <cstddef>
#include <vector>

namespace surgfutr {

// Area under the precision-recall curve via the rank-sum formulation:
// AP = sum over positives, in score order, of precision at each positive.
// Returns 0 when there are no positives.
double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels);

// Macro F1 over 4-way argmax state predictions for one state of interest:
// predictions and truths are state indices; F1 of the binary problem
// "is state s" computed from counts.
double f1_for_state(const std::vector<int>& predicted, const std::vector<int>& truth,
                    int state);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

double mean_absolute_error(const std::vector<double>& predicted,
                           const std::vector<double>& truth);

}  // namespace surgfutr
