#include "abm/aux_tasks.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace abm {

using nn::Graph;
using nn::Var;

void LossWeights::validate() const {
  if (!(contrastive >= 0.0) || !(domain_intent >= 0.0))
    throw ConfigError("loss weights must be nonnegative");
}

std::vector<ContrastiveQuery> contrastive_queries(std::span<const TrainingExample* const> batch) {
  std::vector<ContrastiveQuery> out;
  std::map<TokenSeq, bool> seen;
  auto take = [&](const TokenSeq& q, int segment) {
    if (q.empty() || !seen.emplace(q, true).second) return;
    out.push_back({q, segment});
  };
  for (const TrainingExample* ex : batch) {
    const QueryBundle& b = ex->current().bundle;
    take(b.original, kSegmentOriginal);
    for (const TokenSeq& h : b.nbest) take(h, kSegmentNbest);
    take(b.final_query, kSegmentFinal);
  }
  return out;
}

template <typename T>
ContrastiveBatch contrastive_views(Graph<T>& g, const AbmModel<T>& model,
                                   const std::vector<ContrastiveQuery>& queries, double tau,
                                   Rng& rng_a, Rng& rng_b) {
  if (queries.empty()) throw ContractError("contrastive_views: empty batch");
  if (!(tau > 0.0)) throw ContractError("contrastive_views: tau must be positive");
  std::vector<Var> a, b;
  a.reserve(queries.size());
  b.reserve(queries.size());
  RunOptions view_a{true, &rng_a};
  RunOptions view_b{true, &rng_b};
  for (const auto& q : queries) a.push_back(model.encode_query(g, q.tokens, q.segment, view_a));
  for (const auto& q : queries) b.push_back(model.encode_query(g, q.tokens, q.segment, view_b));
  return ContrastiveBatch{nn::concat_rows(g, a), nn::concat_rows(g, b), tau};
}

template <typename T>
Var simcse_loss(Graph<T>& g, const ContrastiveBatch& batch) {
  if (!(batch.tau > 0.0)) throw ContractError("simcse_loss: tau must be positive");
  const Var h = nn::l2_normalize_rows(g, batch.h);
  const Var hp = nn::l2_normalize_rows(g, batch.h_plus);
  if (g.value(h).rows() != g.value(hp).rows()) throw ShapeError("simcse_loss: view sizes differ");
  const Var logits = nn::scale(g, nn::matmul_nt(g, h, hp), 1.0 / batch.tau);
  std::vector<int> targets(g.value(h).rows());
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = static_cast<int>(i);
  return nn::softmax_cross_entropy_rows(g, logits, std::span<const int>(targets));
}

double simcse_loss_value(const std::vector<std::vector<double>>& h,
                         const std::vector<std::vector<double>>& h_plus, double tau) {
  if (h.empty() || h.size() != h_plus.size()) throw ContractError("simcse_loss: bad batch");
  if (!(tau > 0.0)) throw ContractError("simcse_loss: tau must be positive");
  double total = 0.0;
  std::vector<double> logits(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    for (std::size_t j = 0; j < h.size(); ++j) logits[j] = nn::cosine_similarity(h[i], h_plus[j]) / tau;
    total += nn::softmax_cross_entropy_value(logits, static_cast<int>(i));
  }
  return total / static_cast<double>(h.size());
}

template <typename T>
Var domain_intent_loss(Graph<T>& g, Var logits, std::span<const int> targets) {
  const std::size_t classes = g.value(logits).cols();
  for (int d : targets)
    if (d < 0 || static_cast<std::size_t>(d) >= classes)
      throw ContractError("domain_intent_loss: label " + std::to_string(d) + " out of range");
  return nn::softmax_cross_entropy_rows(g, logits, targets);
}

template <typename T>
Var total_loss(Graph<T>& g, Var main, Var self_loss, Var cl_loss, const LossWeights& weights) {
  Var total = main;
  if (self_loss.valid()) total = nn::add(g, total, nn::scale(g, self_loss, weights.contrastive));
  if (cl_loss.valid()) total = nn::add(g, total, nn::scale(g, cl_loss, weights.domain_intent));
  return total;
}

double total_loss_value(double main, double self_loss, double cl_loss, const LossWeights& w) {
  return main + w.contrastive * self_loss + w.domain_intent * cl_loss;
}

#define ABM_INSTANTIATE_AUX(T)                                                                     \
  template ContrastiveBatch contrastive_views<T>(Graph<T>&, const AbmModel<T>&,                   \
                                                 const std::vector<ContrastiveQuery>&, double, Rng&, \
                                                 Rng&);                                            \
  template Var simcse_loss<T>(Graph<T>&, const ContrastiveBatch&);                                 \
  template Var domain_intent_loss<T>(Graph<T>&, Var, std::span<const int>);                        \
  template Var total_loss<T>(Graph<T>&, Var, Var, Var, const LossWeights&);

ABM_INSTANTIATE_AUX(float)
ABM_INSTANTIATE_AUX(double)

}  // namespace abm
