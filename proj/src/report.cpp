#include "abm/report.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "abm/corpus_io.hpp"
#include "abm/errors.hpp"
#include "abm/metrics.hpp"
#include "abm/rng.hpp"
#include "abm/synth.hpp"

namespace abm {

namespace {

int label_of(const TrainingExample& ex) { return ex.ground_truth ? *ex.ground_truth : ex.label; }

std::string hex16(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

template <typename Pred>
SliceRow make_row(std::string family, std::string slice, const std::vector<TrainingExample>& examples,
                  const std::vector<double>& scores, std::optional<double> theta, double floor, Pred pred) {
  SliceRow row;
  row.family = std::move(family);
  row.slice = std::move(slice);
  std::vector<double> s;
  std::vector<int> l;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (!pred(examples[i])) continue;
    const int label = label_of(examples[i]);
    s.push_back(scores[i]);
    l.push_back(label);
    ++row.count;
    if (label == 1) {
      ++row.satisfied;
    } else {
      ++row.dissatisfied;
      if (theta && scores[i] <= *theta) ++row.recalled_at_threshold;
    }
  }
  if (row.satisfied && row.dissatisfied) row.auc = evaluate_auc(s, l);
  if (row.dissatisfied) {
    const ClaResult c = evaluate_cla(s, l, floor);
    row.cla = c.cla;
    row.cla_threshold = c.threshold;
  }
  return row;
}

nlohmann::ordered_json opt(std::optional<double> v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string fmt(std::optional<double> v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", *v);
  return buf;
}

}  // namespace

DomainGroups DomainGroups::from_zipf(double alpha, int num_domains) {
  DomainGroups g;
  const auto p = synth::zipf_probabilities(alpha, num_domains);
  g.head.push_back(0);
  for (int d = 1; d < num_domains; ++d)
    if (p[static_cast<std::size_t>(d)] < 1.0 / num_domains) g.long_tail.push_back(d);
  return g;
}

const SliceRow* MetricsReport::find(const std::string& family, const std::string& slice) const {
  for (const auto& r : rows)
    if (r.family == family && r.slice == slice) return &r;
  return nullptr;
}

MetricsReport slice_report(const std::vector<TrainingExample>& examples, const std::vector<double>& scores,
                           std::optional<double> serving_threshold, double precision_floor, int num_domains,
                           const DomainGroups& groups) {
  if (examples.size() != scores.size()) throw ContractError("slice_report: one score per example");
  if (examples.empty()) throw UndefinedMetricError("undefined metric: empty evaluation set");
  MetricsReport r;
  r.precision_floor = precision_floor;
  r.serving_threshold = serving_threshold;
  auto add = [&](std::string family, std::string slice, auto pred) {
    r.rows.push_back(make_row(std::move(family), std::move(slice), examples, scores, serving_threshold,
                              precision_floor, pred));
  };
  add("all", "all", [](const TrainingExample&) { return true; });
  const SliceRow& all = r.rows.front();
  if (!all.auc) throw UndefinedMetricError("undefined metric: evaluation labels hold a single class");
  r.auc = all.auc;
  r.cla = all.cla;
  r.cla_threshold = all.cla_threshold;

  for (int d = 0; d < num_domains; ++d)
    add("domain", "d" + std::to_string(d), [d](const TrainingExample& e) { return e.slices.domain == d; });
  auto in = [](const std::vector<int>& set) {
    return [&set](const TrainingExample& e) {
      return std::find(set.begin(), set.end(), e.slices.domain) != set.end();
    };
  };
  add("group", "head", in(groups.head));
  add("group", "long_tail", in(groups.long_tail));
  for (int t = 0; t < kNumErrorTypes; ++t) {
    const auto type = static_cast<ErrorType>(t);
    add("error", std::string(to_string(type)), [type](const TrainingExample& e) { return e.slices.error_type == type; });
  }
  add("rare", "rare", [](const TrainingExample& e) { return e.slices.rare; });
  add("rare", "common", [](const TrainingExample& e) { return !e.slices.rare; });
  return r;
}

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["model_id"] = model_id;
  j["corpus_id"] = corpus_id;
  j["precision_floor"] = precision_floor;
  j["auc"] = opt(auc);
  j["cla"] = opt(cla);
  j["cla_threshold"] = opt(cla_threshold);
  j["serving_threshold"] = opt(serving_threshold);
  j["gating"] = serving_threshold ? "enabled" : "disabled";
  j["boundary"] = "clarify when p <= threshold";
  auto& rows_json = j["slices"] = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    nlohmann::ordered_json o;
    o["family"] = row.family;
    o["slice"] = row.slice;
    o["count"] = row.count;
    o["satisfied"] = row.satisfied;
    o["dissatisfied"] = row.dissatisfied;
    o["auc"] = opt(row.auc);
    o["cla"] = opt(row.cla);
    o["cla_threshold"] = opt(row.cla_threshold);
    o["recalled_at_threshold"] = row.recalled_at_threshold;
    o["insufficient_data"] = row.insufficient_data();
    rows_json.push_back(std::move(o));
  }
  return j;
}

std::string MetricsReport::to_table() const {
  std::ostringstream os;
  os << "model " << model_id << "  corpus " << corpus_id << "  floor " << precision_floor << "  threshold "
     << fmt(serving_threshold) << (serving_threshold ? "" : " (gating disabled)") << '\n';
  os << std::left << std::setw(8) << "family" << std::setw(11) << "slice" << std::right << std::setw(7) << "n"
     << std::setw(7) << "sat" << std::setw(7) << "dissat" << std::setw(9) << "AUC" << std::setw(9) << "CLA"
     << std::setw(12) << "recall@thr" << '\n';
  for (const auto& row : rows) {
    os << std::left << std::setw(8) << row.family << std::setw(11) << row.slice << std::right << std::setw(7)
       << row.count << std::setw(7) << row.satisfied << std::setw(7) << row.dissatisfied << std::setw(9)
       << fmt(row.auc) << std::setw(9) << fmt(row.cla) << std::setw(12)
       << (std::to_string(row.recalled_at_threshold) + "/" + std::to_string(row.dissatisfied));
    if (row.insufficient_data()) os << "  insufficient-data";
    os << '\n';
  }
  return os.str();
}

std::string ablation_table(const std::vector<std::pair<std::string, MetricsReport>>& runs) {
  std::ostringstream os;
  os << std::left << std::setw(8) << "model" << std::right << std::setw(20) << "overall AUC/CLA" << std::setw(20)
     << "head AUC/CLA" << std::setw(20) << "long-tail AUC/CLA" << std::setw(20) << "rare AUC/CLA" << std::setw(13)
     << "rare rec@thr" << '\n';
  for (const auto& [name, rep] : runs) {
    auto cell = [&](const char* family, const char* slice) {
      const SliceRow* row = rep.find(family, slice);
      return row ? fmt(row->auc) + " / " + fmt(row->cla) : std::string("-");
    };
    const SliceRow* rare = rep.find("rare", "rare");
    os << std::left << std::setw(8) << name << std::right << std::setw(20) << cell("all", "all") << std::setw(20)
       << cell("group", "head") << std::setw(20) << cell("group", "long_tail") << std::setw(20)
       << cell("rare", "rare") << std::setw(13)
       << (rare ? std::to_string(rare->recalled_at_threshold) + "/" + std::to_string(rare->dissatisfied) : "-")
       << '\n';
  }
  return os.str();
}

bool ab_group_a(const std::string& session_id) {
  return (fnv1a64(session_id.data(), session_id.size()) & 1) == 0;
}

CusResult ab_compare_cus(const std::vector<TrainingExample>& sessions, const std::vector<double>& scores_a,
                         const std::vector<double>& scores_b, std::optional<double> theta_a,
                         std::optional<double> theta_b) {
  if (scores_a.size() != sessions.size() || scores_b.size() != sessions.size())
    throw ContractError("ab_compare_cus: one score per session for each model");
  CusResult r;
  std::size_t good_a = 0, good_b = 0;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const TrainingExample& s = sessions[i];
    if (!s.ground_truth) throw ContractError("ab_compare_cus: session " + s.session_id + " has no ground truth");
    const bool in_a = ab_group_a(s.session_id);
    const double p = in_a ? scores_a[i] : scores_b[i];
    const std::optional<double> theta = in_a ? theta_a : theta_b;
    const bool clarify = theta && p <= *theta;
    const bool satisfied = clarify ? s.slices.error_type != ErrorType::kNone : *s.ground_truth == 1;
    (in_a ? r.sessions_a : r.sessions_b) += 1;
    if (clarify) (in_a ? r.clarified_a : r.clarified_b) += 1;
    if (satisfied) (in_a ? good_a : good_b) += 1;
  }
  if (r.sessions_a == 0 || r.sessions_b == 0) throw ContractError("ab_compare_cus: empty A/B group");
  r.cus_a = static_cast<double>(good_a) / static_cast<double>(r.sessions_a);
  r.cus_b = static_cast<double>(good_b) / static_cast<double>(r.sessions_b);
  return r;
}

std::string corpus_id(const std::vector<LabeledSession>& records) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& r : records) {
    const std::string line = to_line(r);
    h = fnv1a64(line.data(), line.size(), h);
  }
  return hex16(h);
}

}  // namespace abm
