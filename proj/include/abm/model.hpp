#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "abm/domain.hpp"
#include "abm/kv_config.hpp"
#include "abm/layers.hpp"

namespace abm {

struct AbmConfig {
  std::size_t embed_dim = 32;
  std::size_t heads = 4;
  std::size_t layers_asr = 2;      // ASR/query match sub-module
  std::size_t layers_reply = 2;    // query/reply match sub-module
  std::size_t layers_session = 2;  // session match sub-module
  std::size_t turns = 5;
  std::size_t nbest = 3;
  std::size_t vocab_size = 400;
  int num_domains = 6;
  int num_intents = 4;
  int num_slots = 16;
  std::size_t max_query_len = 16;
  std::size_t max_title_len = 24;
  std::size_t max_slots = 4;
  std::size_t ffn_multiplier = 4;
  double dropout = 0.1;
  std::uint64_t init_seed = 1;

  /// Table-1 sizes: E=320, five turns, four layers per sub-module.
  static AbmConfig paper_scale();

  void validate() const;
  std::size_t num_classes() const {
    return static_cast<std::size_t>(num_domains) * static_cast<std::size_t>(num_intents);
  }
  // Row 0 is PAD; then domains, intents, slots.
  std::size_t nlu_rows() const {
    return 1 + static_cast<std::size_t>(num_domains + num_intents + num_slots);
  }
  std::size_t asr_positions() const { return (nbest + 2) * max_query_len; }
  std::size_t reply_positions() const { return max_query_len + 2 + max_slots + max_title_len; }
  std::size_t session_positions() const { return turns * (max_query_len + 2 + max_slots + 2); }

  // "model." keys.
  static AbmConfig from_kv(const KvConfig& kv, const AbmConfig& defaults);
  static AbmConfig from_kv(const KvConfig& kv) { return from_kv(kv, AbmConfig{}); }
  void to_kv(KvConfig& kv) const;
  bool operator==(const AbmConfig&) const = default;
};

struct RunOptions {
  bool training = false;
  Rng* rng = nullptr;  // dropout masks; required when training with dropout > 0
};

enum QuerySegment : int { kSegmentOriginal = 0, kSegmentNbest = 1, kSegmentFinal = 2 };

template <typename T>
struct ForwardTrace {
  nn::Tensor<T> s_e, o_e, t_q;
  nn::Tensor<T> e_p, o_p, t_r;
  nn::Tensor<T> e_s, o_s, t_s, sep_current;
  double p = 0.5;
};

/// The three-sub-module satisfaction model with its fusion layer and the
/// domain-intent head. One token table is shared by every sub-module and by
/// the contrastive query encoder.
template <typename T>
class AbmModel {
 public:
  explicit AbmModel(const AbmConfig& config);
  AbmModel(const AbmModel&) = delete;
  AbmModel& operator=(const AbmModel&) = delete;

  const AbmConfig& config() const { return config_; }
  nn::ParameterStore<T>& params() { return store_; }
  const nn::ParameterStore<T>& params() const { return store_; }

  struct AsrEncoding {
    nn::Var t_q, s_e, o_e;
  };
  struct ReplyEncoding {
    nn::Var t_r, e_p, o_p;
  };
  struct SessionEncoding {
    nn::Var t_s, sep_current, e_s, o_s;
    nn::Mask real;  // per position
    std::size_t sep_index = 0;
  };
  struct Forward {
    AsrEncoding asr;
    ReplyEncoding reply;
    SessionEncoding session;
    nn::Var p;
  };

  AsrEncoding encode_asr_query_match(nn::Graph<T>& g, const QueryBundle& bundle,
                                     const RunOptions& run) const;
  ReplyEncoding encode_query_reply_match(nn::Graph<T>& g, const TokenSeq& final_query,
                                         const NluResult& nlu, const TokenSeq& title,
                                         const RunOptions& run) const;
  SessionEncoding encode_session(nn::Graph<T>& g, const std::vector<WindowSlot>& window,
                                 const RunOptions& run) const;
  // sigmoid(dense([t_q ; t_r ; t_s])), shape [1 x 1].
  nn::Var fuse_and_predict(nn::Graph<T>& g, nn::Var t_q, nn::Var t_r, nn::Var t_s) const;

  /// One query through the ASR sub-module's embeddings and encoder blocks,
  /// reduce-max pooled. Used for the contrastive views.
  nn::Var encode_query(nn::Graph<T>& g, const TokenSeq& tokens, int segment,
                       const RunOptions& run) const;

  // Dense layer on the current turn's SEP vector, shape [1 x C].
  nn::Var domain_intent_logits(nn::Graph<T>& g, nn::Var sep_current) const;

  Forward forward(nn::Graph<T>& g, const TrainingExample& example, const RunOptions& run) const;
  ForwardTrace<T> trace(const TrainingExample& example, const RunOptions& run) const;
  double predict(const TrainingExample& example) const;

  std::vector<nn::Tensor<T>> snapshot() const;
  void restore(const std::vector<nn::Tensor<T>>& values);

 private:
  nn::Var embed_sum(nn::Graph<T>& g, nn::Var rows, std::size_t positions_limit,
                    nn::Parameter<T>* pos, nn::Parameter<T>* seg, std::span<const int> segments,
                    nn::Parameter<T>* extra, std::span<const int> extra_ids, const char* what) const;
  nn::Var run_blocks(nn::Graph<T>& g, nn::Var x, const std::vector<nn::EncoderBlockParams<T>>& blocks,
                     const nn::Mask* mask, const RunOptions& run) const;
  int nlu_domain_row(int d) const { return 1 + d; }
  int nlu_intent_row(int i) const { return 1 + config_.num_domains + i; }
  int nlu_slot_row(int s) const { return 1 + config_.num_domains + config_.num_intents + s; }

  AbmConfig config_;
  nn::ParameterStore<T> store_;
  nn::Parameter<T>* token_table_;
  nn::Parameter<T>* nlu_table_;
  nn::Parameter<T>* interval_table_;
  nn::Parameter<T>* sep_embedding_;
  nn::Parameter<T>* asr_pos_;
  nn::Parameter<T>* asr_segment_;
  nn::Parameter<T>* reply_pos_;
  nn::Parameter<T>* reply_segment_;
  nn::Parameter<T>* session_pos_;
  nn::Parameter<T>* session_segment_;
  nn::Parameter<T>* session_turn_;
  std::vector<nn::EncoderBlockParams<T>> asr_blocks_;
  std::vector<nn::EncoderBlockParams<T>> reply_blocks_;
  std::vector<nn::EncoderBlockParams<T>> session_blocks_;
  nn::Parameter<T>* fusion_w_;
  nn::Parameter<T>* fusion_b_;
  nn::Parameter<T>* intent_w_;
  nn::Parameter<T>* intent_b_;
};

/// Batch mean of binary cross-entropy between predictions and labels.
template <typename T>
nn::Var main_loss(nn::Graph<T>& g, const std::vector<nn::Var>& probabilities,
                  const std::vector<int>& labels);

}  // namespace abm
