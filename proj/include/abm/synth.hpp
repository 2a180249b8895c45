#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "abm/domain.hpp"
#include "abm/kv_config.hpp"
#include "abm/rng.hpp"

namespace abm::synth {

// Indexed by static_cast<int>(ErrorType): ASR, NLU, IR, USER, NONE.
using ErrorMix = std::array<double, kNumErrorTypes>;

/// Error mix with `error_rate` mass spread over ASR/NLU/IR/USER in the
/// proportions of the online error analysis (ASR 48%, the rest split 12:23:19).
ErrorMix analysis_error_mix(double error_rate);

struct GeneratorConfig {
  int num_domains = 6;
  int num_intents = 4;
  int num_slots = 16;
  double zipf_exponent = 1.0;
  std::size_t vocab_size = 400;
  std::size_t rare_token_pool_size = 80;
  double asr_noise_rate = 0.3;
  ErrorMix error_type_mix = analysis_error_mix(0.33);
  double weak_label_flip_rate = 0.1;
  double rare_utterance_rate = 0.2;
  double rewrite_revert_rate = 0.5;  // fraction of ASR substitutions the rewriter undoes
  double error_persist_rate = 0.5;   // P(rephrased turn keeps the previous error)
  std::size_t nbest = 3;
  std::size_t max_query_len = 16;
  std::size_t utterance_max_len = 6;
  std::size_t max_title_len = 24;
  std::size_t max_session_len = 10;
  std::size_t max_slots = 4;
  std::size_t train_sessions = 2000;
  std::size_t valid_sessions = 500;
  std::size_t test_sessions = 1000;
  std::uint64_t seed = 7;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
  Limits limits() const;

  // Keys under the "gen." namespace; missing keys keep their defaults.
  static GeneratorConfig from_kv(const KvConfig& kv);
  void to_kv(KvConfig& kv) const;
};

/// Vocabulary partition: per-domain pools (intent keywords first, then
/// content words) followed by one global rare pool.
class TokenLayout {
 public:
  explicit TokenLayout(const GeneratorConfig& cfg);

  std::size_t domain_pool_size() const { return pool_size_; }
  TokenId intent_keyword(int domain, int intent) const;
  TokenId content_token(int domain, std::size_t k) const;
  std::size_t content_pool_size() const { return pool_size_ - static_cast<std::size_t>(num_intents_); }
  TokenId rare_token(std::size_t k) const;
  std::size_t rare_pool_size() const { return rare_size_; }

  bool in_domain_pool(TokenId id, int domain) const;
  bool in_rare_pool(TokenId id) const;
  // Domain whose pool holds `id`, if any.
  std::optional<int> domain_of(TokenId id) const;
  std::optional<int> intent_of_keyword(TokenId id) const;
  std::size_t vocab_size() const { return vocab_size_; }

  /// Human-readable names for every id, e.g. "d0.play", "d2.w7", "rare13".
  Vocab vocab() const;

 private:
  int num_domains_;
  int num_intents_;
  std::size_t pool_size_;
  std::size_t rare_size_;
  std::size_t vocab_size_;
  TokenId rare_base_;
};

struct Utterance {
  TokenSeq tokens;
  int intent = 0;
};

struct ErrorPlan {
  ErrorType error_type = ErrorType::kNone;
  std::size_t affected_turn = 0;
  bool rare_utterance = false;
};

struct TurnOutcome {
  int satisfied = 1;
  UserAction action = UserAction::kPlayThrough;
};

std::vector<double> zipf_probabilities(double alpha, int num_domains);

/// Rank-1 domain is id 0. Throws ConfigError for alpha <= 0 or < 2 domains.
int sample_domain(Rng& rng, double alpha, int num_domains);

Utterance sample_utterance(Rng& rng, const TokenLayout& layout, int domain, bool rare,
                           std::size_t max_len);

/// Independent per-position substitution by a different non-reserved token.
/// Returns the corrupted copy and marks substituted positions in `changed`.
TokenSeq substitute_tokens(const TokenSeq& tokens, double noise_rate, std::size_t vocab_size,
                           Rng& rng, std::vector<bool>* changed = nullptr);

std::size_t edit_distance(const TokenSeq& a, const TokenSeq& b);

QueryBundle corrupt_asr(const TokenSeq& tokens, double noise_rate, std::size_t k,
                        std::size_t vocab_size, double revert_fraction, Rng& rng);

TurnOutcome simulate_turn_outcome(const ErrorPlan& plan, Rng& rng);

/// Rule-based label before noise: 0 iff R1 (identical q_f within 30 s),
/// R2 (interrupt/abandon) or R3 (same domain-intent rephrase within 30 s).
int weak_label_rules(const Turn& turn, const Turn* next_turn);

/// Rules followed by a flip with probability flip_rate.
int weak_label(const Turn& turn, const Turn* next_turn, double flip_rate, Rng& rng);

struct GeneratedSession {
  Session session;          // full session, every generated turn
  std::vector<ErrorPlan> plans;
  std::vector<int> ground_truth;
  std::vector<int> true_domain;
  std::vector<int> true_intent;
  std::vector<TokenSeq> clean_utterance;
};

/// One full session from its own RNG stream.
GeneratedSession generate_session(const GeneratorConfig& cfg, const TokenLayout& layout,
                                  std::string session_id, Rng& rng);

/// Pick the turn under prediction, truncate and attach labels.
LabeledSession label_session(const GeneratorConfig& cfg, const GeneratedSession& gen,
                             bool with_ground_truth, Rng& rng);

struct Corpus {
  std::vector<LabeledSession> train;
  std::vector<LabeledSession> valid;
  std::vector<LabeledSession> test;
};

Corpus generate_corpus(const GeneratorConfig& cfg);

struct CorpusStats {
  std::size_t sessions = 0;
  std::vector<std::size_t> per_domain;
  std::size_t rare = 0;
  std::array<std::size_t, 2> labels{};
  std::array<std::size_t, 2> ground_truth{};
  std::array<std::size_t, kNumErrorTypes> errors{};
  std::size_t weak_true_disagree = 0;  // over records carrying ground truth

  std::string to_json() const;
};

CorpusStats corpus_stats(const std::vector<LabeledSession>& stream, int num_domains);

/// Writes train/valid/test .jsonl, a .stats.json per split and generator.cfg.
void write_corpus_dir(const std::string& dir, const GeneratorConfig& cfg, const Corpus& corpus);

struct LoadedCorpus {
  GeneratorConfig config;
  Corpus corpus;
};

LoadedCorpus read_corpus_dir(const std::string& dir);

}  // namespace abm::synth
