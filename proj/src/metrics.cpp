#include "cheatt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace cheatt {

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  const std::size_t n = scores.size();
  if (labels.size() != n) throw MetricError("auroc: scores/labels size mismatch");
  std::size_t n_pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw MetricError("auroc: labels must be 0/1");
    n_pos += static_cast<std::size_t>(y);
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw MetricError("auroc: needs at least one positive and one negative label");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Average ranks over tied score runs, then the Mann-Whitney identity
  // AUROC = (R_pos - n_pos(n_pos+1)/2) / (n_pos n_neg).
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double auroc_macro(const std::vector<std::vector<double>>& class_scores,
                   const std::vector<int>& labels) {
  if (class_scores.empty()) throw MetricError("auroc_macro: no class scores");
  for (int y : labels) {
    if (y < 0 || y >= static_cast<int>(class_scores.size())) {
      throw MetricError("auroc_macro: label " + std::to_string(y) + " has no score row");
    }
  }
  double sum = 0.0;
  int counted = 0;
  for (std::size_t c = 0; c < class_scores.size(); ++c) {
    if (class_scores[c].size() != labels.size()) {
      throw MetricError("auroc_macro: class " + std::to_string(c) + " score size mismatch");
    }
    std::vector<int> one_vs_rest(labels.size());
    std::size_t pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      one_vs_rest[i] = labels[i] == static_cast<int>(c) ? 1 : 0;
      pos += static_cast<std::size_t>(one_vs_rest[i]);
    }
    if (pos == 0 || pos == labels.size()) continue;  // class absent (or universal)
    sum += auroc(class_scores[c], one_vs_rest);
    ++counted;
  }
  if (counted == 0) throw MetricError("auroc_macro: no class has both outcomes");
  return sum / counted;
}

double r_squared(const std::vector<double>& preds, const std::vector<double>& targets) {
  if (preds.size() != targets.size()) throw MetricError("r_squared: size mismatch");
  if (targets.size() < 2) throw MetricError("r_squared: needs at least 2 targets");
  double mean = 0.0;
  for (double t : targets) mean += t;
  mean /= targets.size();
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    ss_tot += (targets[i] - mean) * (targets[i] - mean);
    ss_res += (preds[i] - targets[i]) * (preds[i] - targets[i]);
  }
  if (ss_tot <= 0.0) throw MetricError("r_squared: zero-variance targets");
  return 1.0 - ss_res / ss_tot;
}

}  // namespace cheatt
