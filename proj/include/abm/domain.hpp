#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace abm {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kSepId = 2;
inline constexpr int kNumIntervalBuckets = 11;

/// Dense 0-based token vocabulary. Ids 0..2 are PAD, UNK, SEP.
class Vocab {
 public:
  Vocab();

  // Returns the existing id when the token is already present.
  TokenId add(std::string_view token);
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }

 private:
  std::unordered_map<std::string, TokenId> ids_;
  std::vector<std::string> tokens_;
};

struct QueryBundle {
  TokenSeq original;             // q_o
  std::vector<TokenSeq> nbest;   // q_n, best first
  TokenSeq final_query;          // q_f, after rewriting
};

struct NluResult {
  int domain = 0;
  int intent = 0;
  std::vector<int> slots;
};

struct CandidateResponse {
  TokenSeq title;
  TokenSeq voice_response;
};

enum class UserAction { kPlayThrough, kRepeat, kRephrase, kInterrupt, kAbandon, kNone };

enum class ErrorType { kAsr, kNlu, kIr, kUser, kNone };
inline constexpr int kNumErrorTypes = 5;

std::string_view to_string(UserAction a);
std::string_view to_string(ErrorType e);
UserAction parse_user_action(std::string_view s);
ErrorType parse_error_type(std::string_view s);

struct Turn {
  QueryBundle bundle;
  NluResult nlu;
  CandidateResponse response;
  double interval_s = 0.0;
  UserAction action = UserAction::kNone;
};

struct Session {
  std::string session_id;
  std::vector<Turn> turns;
  std::size_t current_index = 0;
};

struct SliceTags {
  ErrorType error_type = ErrorType::kNone;
  bool rare = false;
  int domain = 0;  // true domain of the current turn
};

/// One corpus record: a session truncated at the turn under prediction plus
/// its labels. This is the unit stored one-per-line in corpus files.
struct LabeledSession {
  Session session;
  int label = 1;          // weak label, 1 = satisfied
  int domain_intent = 0;  // joint class domain * num_intents + intent
  SliceTags slices;
  std::optional<int> ground_truth;
};

struct Limits {
  std::size_t vocab_size = 0;
  int num_domains = 0;
  int num_intents = 0;
  int num_slots = 0;
  std::size_t max_query_len = 16;
  std::size_t max_title_len = 24;
  std::size_t max_session_len = 10;
  std::size_t max_slots = 4;
  std::size_t max_nbest = 8;
};

struct WindowSlot {
  Turn turn;
  bool padded = false;
};

struct TrainingExample {
  std::string session_id;
  std::vector<WindowSlot> window;  // oldest first, last slot is the current turn
  int label = 1;
  int domain_intent = 0;
  SliceTags slices;
  std::optional<int> ground_truth;

  const Turn& current() const { return window.back().turn; }
};

int joint_domain_intent(int domain, int intent, int num_intents);

/// Whitespace tokenization with UNK for out-of-vocabulary words.
/// Throws ContractError on blank input.
TokenSeq tokenize(std::string_view text, const Vocab& vocab);

/// min(floor(log2(1 + seconds)), 10). Throws ContractError for negative input.
int discretize_interval(double seconds);

/// Every invariant violation in the session; empty means valid.
std::vector<std::string> validate_session(const Session& s, const Limits& limits);

Turn pad_turn();

/// The `length` turns ending at current_index, left-padded with PAD turns.
std::vector<WindowSlot> window(const Session& s, std::size_t length);

TrainingExample make_example(const LabeledSession& record, std::size_t turns);

}  // namespace abm
