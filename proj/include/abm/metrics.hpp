#pragma once

#include <cstddef>
#include <optional>
#include <span>

namespace abm {

/// Mann-Whitney AUC with label 1 (satisfied) as the positive class; ties
/// count one half. Throws UndefinedMetricError unless both classes occur.
double evaluate_auc(std::span<const double> scores, std::span<const int> labels);

struct ClaResult {
  double cla = 0.0;                  // recall of the dissatisfied class
  std::optional<double> threshold;   // absent when no threshold meets the floor
  double precision = 0.0;            // at `threshold`
  std::size_t true_positives = 0;    // dissatisfied with p <= threshold
  std::size_t false_positives = 0;   // satisfied with p <= threshold
  std::size_t dissatisfied = 0;
};

/// Detector: dissatisfied iff p <= theta, theta ranging over observed scores.
/// Maximizes dissatisfied recall subject to precision >= floor; equal recall
/// keeps the lowest theta. Throws UndefinedMetricError without label-0 examples.
ClaResult evaluate_cla(std::span<const double> scores, std::span<const int> labels,
                       double precision_floor = 0.85);

/// The evaluate_cla threshold on validation data (absent = gating disabled).
std::optional<double> select_threshold(std::span<const double> scores, std::span<const int> labels,
                                       double precision_floor = 0.85);

}  // namespace abm
