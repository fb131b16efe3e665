#pragma once

#include <vector>

#include "cheatt/errors.hpp"

namespace cheatt {

// Rank statistic (concordant pairs + half the tied pairs) / (pos * neg
// pairs), computed from average ranks so ties cost O(n log n), not O(n^2).
// Labels must be 0/1 with at least one of each, else MetricError.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// One-vs-rest macro average over the classes present in `labels`;
// class_scores[c][i] scores example i for class c. Every label must index a
// score row. Classes missing from the labels are skipped; MetricError if no
// class has both positives and negatives.
double auroc_macro(const std::vector<std::vector<double>>& class_scores,
                   const std::vector<int>& labels);

// 1 - SS_res/SS_tot about the target mean. May be arbitrarily negative.
// Fewer than 2 targets or zero target variance -> MetricError.
double r_squared(const std::vector<double>& preds, const std::vector<double>& targets);

}  // namespace cheatt
