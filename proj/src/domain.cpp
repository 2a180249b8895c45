#include "abm/domain.hpp"

#include <cctype>
#include <cmath>

#include "abm/errors.hpp"

namespace abm {

Vocab::Vocab() {
  add("<pad>");
  add("<unk>");
  add("<sep>");
}

TokenId Vocab::add(std::string_view token) {
  if (auto it = ids_.find(std::string(token)); it != ids_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.emplace_back(token);
  ids_.emplace(tokens_.back(), id);
  return id;
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  if (auto it = ids_.find(std::string(token)); it != ids_.end()) return it->second;
  return std::nullopt;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw ContractError("token id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

std::string_view to_string(UserAction a) {
  switch (a) {
    case UserAction::kPlayThrough: return "play_through";
    case UserAction::kRepeat: return "repeat";
    case UserAction::kRephrase: return "rephrase";
    case UserAction::kInterrupt: return "interrupt";
    case UserAction::kAbandon: return "abandon";
    case UserAction::kNone: return "none";
  }
  return "none";
}

std::string_view to_string(ErrorType e) {
  switch (e) {
    case ErrorType::kAsr: return "ASR";
    case ErrorType::kNlu: return "NLU";
    case ErrorType::kIr: return "IR";
    case ErrorType::kUser: return "USER";
    case ErrorType::kNone: return "NONE";
  }
  return "NONE";
}

UserAction parse_user_action(std::string_view s) {
  for (auto a : {UserAction::kPlayThrough, UserAction::kRepeat, UserAction::kRephrase,
                 UserAction::kInterrupt, UserAction::kAbandon, UserAction::kNone}) {
    if (to_string(a) == s) return a;
  }
  throw ParseError("action", "unknown user action '" + std::string(s) + "'");
}

ErrorType parse_error_type(std::string_view s) {
  for (auto e : {ErrorType::kAsr, ErrorType::kNlu, ErrorType::kIr, ErrorType::kUser,
                 ErrorType::kNone}) {
    if (to_string(e) == s) return e;
  }
  throw ParseError("error_type", "unknown error type '" + std::string(s) + "'");
}

int joint_domain_intent(int domain, int intent, int num_intents) {
  return domain * num_intents + intent;
}

TokenSeq tokenize(std::string_view text, const Vocab& vocab) {
  TokenSeq out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.push_back(vocab.find(text.substr(i, j - i)).value_or(kUnkId));
    i = j;
  }
  if (out.empty()) throw ContractError("empty query");
  return out;
}

int discretize_interval(double seconds) {
  if (!(seconds >= 0.0)) throw ContractError("negative interval");
  // Largest b with 2^b <= 1 + seconds, computed without log rounding.
  const double x = 1.0 + seconds;
  int bucket = 0;
  double next = 2.0;
  while (bucket < kNumIntervalBuckets - 1 && next <= x) {
    ++bucket;
    next *= 2.0;
  }
  return bucket;
}

namespace {

void check_seq(const TokenSeq& seq, std::size_t max_len, const Limits& limits,
               const std::string& where, std::vector<std::string>& out) {
  if (seq.empty()) out.push_back(where + ": empty sequence");
  if (seq.size() > max_len) out.push_back(where + ": length exceeds limit");
  for (TokenId id : seq) {
    if (id < 0 || static_cast<std::size_t>(id) >= limits.vocab_size) {
      out.push_back(where + ": id out of range");
      break;
    }
  }
}

}  // namespace

std::vector<std::string> validate_session(const Session& s, const Limits& limits) {
  std::vector<std::string> out;
  if (s.turns.empty()) out.push_back("session: no turns");
  if (s.turns.size() > limits.max_session_len) out.push_back("session: too many turns");
  if (!s.turns.empty() && s.current_index >= s.turns.size())
    out.push_back("session: current_index out of range");
  for (std::size_t i = 0; i < s.turns.size(); ++i) {
    const Turn& t = s.turns[i];
    const std::string where = "turn " + std::to_string(i);
    check_seq(t.bundle.original, limits.max_query_len, limits, where + " q_o", out);
    if (t.bundle.nbest.empty()) out.push_back(where + " q_n: empty n-best list");
    if (t.bundle.nbest.size() > limits.max_nbest) out.push_back(where + " q_n: too many hypotheses");
    for (std::size_t k = 0; k < t.bundle.nbest.size(); ++k)
      check_seq(t.bundle.nbest[k], limits.max_query_len, limits,
                where + " q_n[" + std::to_string(k) + "]", out);
    check_seq(t.bundle.final_query, limits.max_query_len, limits, where + " q_f", out);
    check_seq(t.response.title, limits.max_title_len, limits, where + " title", out);
    if (t.nlu.domain < 0 || t.nlu.domain >= limits.num_domains)
      out.push_back(where + " nlu: domain id out of range");
    if (t.nlu.intent < 0 || t.nlu.intent >= limits.num_intents)
      out.push_back(where + " nlu: intent id out of range");
    if (t.nlu.slots.size() > limits.max_slots) out.push_back(where + " nlu: too many slots");
    for (int slot : t.nlu.slots) {
      if (slot < 0 || slot >= limits.num_slots) {
        out.push_back(where + " nlu: slot id out of range");
        break;
      }
    }
    if (!(t.interval_s >= 0.0)) out.push_back(where + ": negative interval");
    if (i == 0 && t.interval_s != 0.0) out.push_back(where + ": first turn interval must be 0");
  }
  return out;
}

Turn pad_turn() {
  Turn t;
  t.bundle.original = {kPadId};
  t.bundle.nbest = {{kPadId}};
  t.bundle.final_query = {kPadId};
  t.response.title = {kPadId};
  t.action = UserAction::kNone;
  return t;
}

std::vector<WindowSlot> window(const Session& s, std::size_t length) {
  if (length == 0) throw ContractError("window length must be >= 1");
  if (s.current_index >= s.turns.size()) throw ContractError("current_index out of range");
  const std::size_t available = s.current_index + 1;
  const std::size_t real = std::min(length, available);
  std::vector<WindowSlot> out;
  out.reserve(length);
  for (std::size_t i = real; i < length; ++i) out.push_back({pad_turn(), true});
  for (std::size_t i = available - real; i < available; ++i) out.push_back({s.turns[i], false});
  return out;
}

TrainingExample make_example(const LabeledSession& record, std::size_t turns) {
  TrainingExample ex;
  ex.session_id = record.session.session_id;
  ex.window = window(record.session, turns);
  ex.label = record.label;
  ex.domain_intent = record.domain_intent;
  ex.slices = record.slices;
  ex.ground_truth = record.ground_truth;
  return ex;
}

}  // namespace abm
