#pragma once

#include <span>
#include <vector>

#include "abm/model.hpp"

namespace abm {

struct LossWeights {
  double contrastive = 1e-2;    // w1
  double domain_intent = 1e-1;  // w2
  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

/// A query fed to the contrastive encoder, with the segment it came from.
struct ContrastiveQuery {
  TokenSeq tokens;
  int segment = kSegmentOriginal;
};

/// Rows of `h` and `h_plus` are the two dropout views of the same query.
struct ContrastiveBatch {
  nn::Var h;
  nn::Var h_plus;
  double tau = 0.05;
};

/// Every original, n-best and final query of the current turns, deduplicated
/// by token sequence in first-seen order.
std::vector<ContrastiveQuery> contrastive_queries(std::span<const TrainingExample* const> batch);

/// Encodes each query twice through the shared query encoder, with view A
/// masks from `rng_a` and view B masks from `rng_b`.
template <typename T>
ContrastiveBatch contrastive_views(nn::Graph<T>& g, const AbmModel<T>& model,
                                   const std::vector<ContrastiveQuery>& queries, double tau,
                                   Rng& rng_a, Rng& rng_b);

/// Mean over i of -ln softmax_j(cos(h_i, h+_j) / tau)[i].
template <typename T>
nn::Var simcse_loss(nn::Graph<T>& g, const ContrastiveBatch& batch);

double simcse_loss_value(const std::vector<std::vector<double>>& h,
                         const std::vector<std::vector<double>>& h_plus, double tau);

/// Batch mean of softmax cross-entropy; `logits` is [B x C].
template <typename T>
nn::Var domain_intent_loss(nn::Graph<T>& g, nn::Var logits, std::span<const int> targets);

/// L_main + w1 L_self + w2 L_cl. Invalid Vars stand for terms that were not computed.
template <typename T>
nn::Var total_loss(nn::Graph<T>& g, nn::Var main, nn::Var self_loss, nn::Var cl_loss,
                   const LossWeights& weights);

double total_loss_value(double main, double self_loss, double cl_loss, const LossWeights& weights);

}  // namespace abm
