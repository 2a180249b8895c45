#pragma once

#include <optional>
#include <string>
#include <vector>

#include "abm/domain.hpp"
#include "json.hpp"

namespace abm {

/// Which domains count as head and long tail in reports.
struct DomainGroups {
  std::vector<int> head;
  std::vector<int> long_tail;
  /// Head = rank-1 domain; long tail = domains whose Zipf probability is
  /// below the uniform share 1/num_domains.
  static DomainGroups from_zipf(double alpha, int num_domains);
};

struct SliceRow {
  std::string family;  // "all", "domain", "group", "error", "rare"
  std::string slice;
  std::size_t count = 0;
  std::size_t satisfied = 0;
  std::size_t dissatisfied = 0;
  std::optional<double> auc;
  std::optional<double> cla;
  std::optional<double> cla_threshold;
  // Dissatisfied examples with p <= serving threshold.
  std::size_t recalled_at_threshold = 0;
  bool insufficient_data() const { return !auc || !cla; }
  double recall_at_threshold() const {
    return dissatisfied ? static_cast<double>(recalled_at_threshold) / static_cast<double>(dissatisfied) : 0.0;
  }
};

struct MetricsReport {
  std::string model_id;
  std::string corpus_id;
  double precision_floor = 0.85;
  std::optional<double> auc;
  std::optional<double> cla;
  std::optional<double> cla_threshold;     // test-set optimum, for reference
  std::optional<double> serving_threshold;  // selected on validation; absent = gating disabled
  std::vector<SliceRow> rows;

  const SliceRow* find(const std::string& family, const std::string& slice) const;
  nlohmann::ordered_json to_json() const;
  std::string to_table() const;
};

/// AUC/CLA overall and per domain, domain group, error type and rare flag,
/// using ground truth where present (weak labels otherwise), plus recall at
/// the serving threshold per slice.
MetricsReport slice_report(const std::vector<TrainingExample>& examples, const std::vector<double>& scores,
                           std::optional<double> serving_threshold, double precision_floor, int num_domains,
                           const DomainGroups& groups);

/// One row per ablation in a Table-2 layout: overall, head, long-tail, rare.
std::string ablation_table(const std::vector<std::pair<std::string, MetricsReport>>& runs);

struct CusResult {
  double cus_a = 0.0;
  double cus_b = 0.0;
  std::size_t sessions_a = 0;
  std::size_t sessions_b = 0;
  std::size_t clarified_a = 0;
  std::size_t clarified_b = 0;
};

// Group A iff the FNV-1a hash of the session id is even.
bool ab_group_a(const std::string& session_id);

/// Each session is served by the model of its hash group: p <= theta turns
/// the reply into a clarification, which counts satisfied iff the turn had
/// an error; otherwise the turn counts as its ground truth.
CusResult ab_compare_cus(const std::vector<TrainingExample>& sessions, const std::vector<double>& scores_a,
                         const std::vector<double>& scores_b, std::optional<double> theta_a,
                         std::optional<double> theta_b);

// Id of a corpus split: FNV-1a over its serialized records.
std::string corpus_id(const std::vector<LabeledSession>& records);

}  // namespace abm
