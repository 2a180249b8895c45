#include "abm/serving.hpp"

namespace abm {

using nn::Graph;
using nn::Tensor;

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kAwaitAsr: return "AwaitAsr";
    case Stage::kAwaitSession: return "AwaitSession";
    case Stage::kAwaitReply: return "AwaitReply";
    case Stage::kDone: return "Done";
  }
  return "?";
}

std::string_view to_string(DecisionKind k) { return k == DecisionKind::kClarify ? "clarify" : "respond"; }

Decision decide(double p, std::optional<double> threshold) {
  Decision d;
  d.p = p;
  d.threshold = threshold;
  d.kind = threshold && p <= *threshold ? DecisionKind::kClarify : DecisionKind::kRespond;
  return d;
}

namespace {

template <typename T>
void expect(const StagedState<T>& state, Stage stage, const char* call) {
  if (state.stage != stage)
    throw ContractError(std::string("out-of-order stage call: ") + call + " needs " + std::string(to_string(stage)) +
                        ", request " + state.request_id + " is at " + std::string(to_string(state.stage)));
}

}  // namespace

template <typename T>
void stage_asr(const AbmModel<T>& model, StagedState<T>& state, const QueryBundle& bundle) {
  expect(state, Stage::kAwaitAsr, "stage_asr");
  Graph<T> g;
  const auto enc = model.encode_asr_query_match(g, bundle, RunOptions{});
  state.t_q = g.value(enc.t_q);
  state.stage = Stage::kAwaitSession;
}

template <typename T>
void stage_session(const AbmModel<T>& model, StagedState<T>& state, const std::vector<WindowSlot>& window) {
  expect(state, Stage::kAwaitSession, "stage_session");
  Graph<T> g;
  const auto enc = model.encode_session(g, window, RunOptions{});
  Tensor<T> t_s = g.value(enc.t_s);
  Tensor<T> sep = g.value(enc.sep_current);
  state.t_s = std::move(t_s);
  state.sep_current = std::move(sep);
  state.stage = Stage::kAwaitReply;
}

template <typename T>
Decision stage_reply(const AbmModel<T>& model, StagedState<T>& state, const TokenSeq& final_query,
                     const NluResult& nlu, const TokenSeq& title, std::optional<double> threshold) {
  expect(state, Stage::kAwaitReply, "stage_reply");
  Graph<T> g;
  const auto enc = model.encode_query_reply_match(g, final_query, nlu, title, RunOptions{});
  const auto p_var = model.fuse_and_predict(g, g.constant(*state.t_q), enc.t_r, g.constant(*state.t_s));
  const double p = static_cast<double>(g.value(p_var).data[0]);
  const Decision d = decide(p, threshold);
  state.p = p;
  state.decision = d;
  state.stage = Stage::kDone;
  return d;
}

template <typename T>
Decision infer_staged(const AbmModel<T>& model, const TrainingExample& example, std::optional<double> threshold,
                      const std::string& request_id) {
  StagedState<T> state;
  state.request_id = request_id;
  const Turn& cur = example.current();
  stage_asr(model, state, cur.bundle);
  stage_session(model, state, example.window);
  return stage_reply(model, state, cur.bundle.final_query, cur.nlu, cur.response.title, threshold);
}

template <typename T>
Decision infer_monolithic(const AbmModel<T>& model, const TrainingExample& example, std::optional<double> threshold) {
  return decide(model.predict(example), threshold);
}

#define ABM_INSTANTIATE_SERVING(T)                                                                         \
  template void stage_asr<T>(const AbmModel<T>&, StagedState<T>&, const QueryBundle&);                      \
  template void stage_session<T>(const AbmModel<T>&, StagedState<T>&, const std::vector<WindowSlot>&);     \
  template Decision stage_reply<T>(const AbmModel<T>&, StagedState<T>&, const TokenSeq&, const NluResult&, \
                                   const TokenSeq&, std::optional<double>);                                \
  template Decision infer_staged<T>(const AbmModel<T>&, const TrainingExample&, std::optional<double>,     \
                                    const std::string&);                                                   \
  template Decision infer_monolithic<T>(const AbmModel<T>&, const TrainingExample&, std::optional<double>);

ABM_INSTANTIATE_SERVING(float)
ABM_INSTANTIATE_SERVING(double)

}  // namespace abm
