#pragma once

#include <optional>
#include <string>

#include "abm/model.hpp"

namespace abm {

enum class Stage { kAwaitAsr, kAwaitSession, kAwaitReply, kDone };
std::string_view to_string(Stage s);

enum class DecisionKind { kRespond, kClarify };
std::string_view to_string(DecisionKind k);

struct Decision {
  DecisionKind kind = DecisionKind::kRespond;
  double p = 0.0;
  std::optional<double> threshold;  // absent = gating disabled, always respond
};

/// Clarify iff p <= threshold (boundary included).
Decision decide(double p, std::optional<double> threshold);

/// Per-request state of the three-stage split: the ASR/query module runs
/// after ASR, the session module after NLU, the reply module after IR.
template <typename T>
struct StagedState {
  std::string request_id;
  Stage stage = Stage::kAwaitAsr;
  std::optional<nn::Tensor<T>> t_q;
  std::optional<nn::Tensor<T>> t_s;
  std::optional<nn::Tensor<T>> sep_current;
  std::optional<double> p;
  std::optional<Decision> decision;
};

/// Each stage throws ContractError, leaving the state untouched, when called
/// out of order.
template <typename T>
void stage_asr(const AbmModel<T>& model, StagedState<T>& state, const QueryBundle& bundle);
template <typename T>
void stage_session(const AbmModel<T>& model, StagedState<T>& state, const std::vector<WindowSlot>& window);
template <typename T>
Decision stage_reply(const AbmModel<T>& model, StagedState<T>& state, const TokenSeq& final_query,
                     const NluResult& nlu, const TokenSeq& title, std::optional<double> threshold);

template <typename T>
Decision infer_staged(const AbmModel<T>& model, const TrainingExample& example, std::optional<double> threshold,
                      const std::string& request_id = {});
template <typename T>
Decision infer_monolithic(const AbmModel<T>& model, const TrainingExample& example,
                          std::optional<double> threshold);

}  // namespace abm
