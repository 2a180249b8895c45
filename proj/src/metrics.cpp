#include "abm/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "abm/errors.hpp"

namespace abm {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ContractError("scores and labels differ in length");
  for (int l : labels)
    if (l != 0 && l != 1) throw ContractError("labels must be 0 or 1");
}

std::vector<std::size_t> ascending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return order;
}

}  // namespace

double evaluate_auc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) throw UndefinedMetricError("undefined metric: AUC needs both classes");

  const auto order = ascending_order(scores);
  // Twice the midrank keeps every rank an integer.
  double positive_rank_sum2 = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank2 = static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) positive_rank_sum2 += midrank2;
    i = j;
  }
  const double np = static_cast<double>(positives);
  const double u = positive_rank_sum2 / 2.0 - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(negatives));
}

ClaResult evaluate_cla(std::span<const double> scores, std::span<const int> labels, double precision_floor) {
  check_inputs(scores, labels);
  ClaResult best;
  best.dissatisfied = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 0));
  if (best.dissatisfied == 0) throw UndefinedMetricError("undefined metric: CLA needs dissatisfied examples");

  const auto order = ascending_order(scores);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 0 ? tp : fp) += 1;
      ++j;
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(best.dissatisfied);
    if (precision >= precision_floor && (!best.threshold || recall > best.cla)) {
      best.cla = recall;
      best.threshold = scores[order[i]];
      best.precision = precision;
      best.true_positives = tp;
      best.false_positives = fp;
    }
    i = j;
  }
  return best;
}

std::optional<double> select_threshold(std::span<const double> scores, std::span<const int> labels,
                                       double precision_floor) {
  return evaluate_cla(scores, labels, precision_floor).threshold;
}

}  // namespace abm
