#include "abm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "abm/corpus_io.hpp"
#include "abm/errors.hpp"
#include "json.hpp"

namespace abm::synth {

namespace {

constexpr double kRuleWindowSeconds = 30.0;

std::size_t error_index(ErrorType e) { return static_cast<std::size_t>(e); }

ErrorType sample_error(Rng& rng, const ErrorMix& mix) {
  double u = rng.uniform();
  for (int i = 0; i < kNumErrorTypes; ++i) {
    u -= mix[static_cast<std::size_t>(i)];
    if (u < 0.0) return static_cast<ErrorType>(i);
  }
  // Rounding leftovers go to the last type with nonzero mass.
  for (int i = kNumErrorTypes - 1; i >= 0; --i)
    if (mix[static_cast<std::size_t>(i)] > 0.0) return static_cast<ErrorType>(i);
  return ErrorType::kNone;
}

}  // namespace

ErrorMix analysis_error_mix(double error_rate) {
  // ASR takes 48% of errors; NLU, IR and USER share the rest 12:23:19.
  const double rest = 1.0 - 0.48;
  ErrorMix mix{};
  mix[error_index(ErrorType::kAsr)] = error_rate * 0.48;
  mix[error_index(ErrorType::kNlu)] = error_rate * rest * 12.0 / 54.0;
  mix[error_index(ErrorType::kIr)] = error_rate * rest * 23.0 / 54.0;
  mix[error_index(ErrorType::kUser)] = error_rate * rest * 19.0 / 54.0;
  mix[error_index(ErrorType::kNone)] = 1.0 - error_rate;
  return mix;
}

void GeneratorConfig::validate() const {
  if (num_domains < 2) throw ConfigError("gen.num_domains must be >= 2");
  if (num_intents < 1) throw ConfigError("gen.num_intents must be >= 1");
  if (num_slots < 1) throw ConfigError("gen.num_slots must be >= 1");
  if (!(zipf_exponent > 0.0)) throw ConfigError("gen.zipf_exponent must be > 0");
  auto rate = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must be in [0,1]");
  };
  rate(asr_noise_rate, "gen.asr_noise_rate");
  rate(weak_label_flip_rate, "gen.weak_label_flip_rate");
  rate(rare_utterance_rate, "gen.rare_utterance_rate");
  rate(rewrite_revert_rate, "gen.rewrite_revert_rate");
  rate(error_persist_rate, "gen.error_persist_rate");
  double sum = 0.0;
  for (double p : error_type_mix) {
    if (!(p >= 0.0)) throw ConfigError("gen.error_type_mix entries must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("gen.error_type_mix must sum to 1");
  if (nbest < 1) throw ConfigError("gen.nbest must be >= 1");
  if (utterance_max_len < 2 || utterance_max_len > max_query_len)
    throw ConfigError("gen.utterance_max_len must be in [2, max_query_len]");
  if (max_title_len < 8) throw ConfigError("gen.max_title_len must be >= 8");
  if (max_session_len < 1) throw ConfigError("gen.max_session_len must be >= 1");
  if (rare_token_pool_size < 1) throw ConfigError("gen.rare_token_pool_size must be >= 1");
  if (vocab_size < 3 + rare_token_pool_size) throw ConfigError("gen.vocab_size too small");
  const std::size_t pool = (vocab_size - 3 - rare_token_pool_size) / static_cast<std::size_t>(num_domains);
  if (pool < static_cast<std::size_t>(num_intents) + 4)
    throw ConfigError("gen.vocab_size too small for the domain pools");
}

Limits GeneratorConfig::limits() const {
  Limits l;
  l.vocab_size = vocab_size;
  l.num_domains = num_domains;
  l.num_intents = num_intents;
  l.num_slots = num_slots;
  l.max_query_len = max_query_len;
  l.max_title_len = max_title_len;
  l.max_session_len = max_session_len;
  l.max_slots = max_slots;
  l.max_nbest = nbest;
  return l;
}

GeneratorConfig GeneratorConfig::from_kv(const KvConfig& kv) {
  GeneratorConfig c;
  auto sz = [&](const char* key, std::size_t fallback) {
    const long long v = kv.get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw ConfigError(std::string(key) + " must be >= 0");
    return static_cast<std::size_t>(v);
  };
  c.num_domains = static_cast<int>(kv.get_int("gen.num_domains", c.num_domains));
  c.num_intents = static_cast<int>(kv.get_int("gen.num_intents", c.num_intents));
  c.num_slots = static_cast<int>(kv.get_int("gen.num_slots", c.num_slots));
  c.zipf_exponent = kv.get_double("gen.zipf_exponent", c.zipf_exponent);
  c.vocab_size = sz("gen.vocab_size", c.vocab_size);
  c.rare_token_pool_size = sz("gen.rare_token_pool_size", c.rare_token_pool_size);
  c.asr_noise_rate = kv.get_double("gen.asr_noise_rate", c.asr_noise_rate);
  if (kv.has("gen.error_type_mix")) {
    auto v = kv.get_doubles("gen.error_type_mix", {});
    if (v.size() != kNumErrorTypes)
      throw ConfigError("gen.error_type_mix needs 5 values (ASR,NLU,IR,USER,NONE)");
    std::copy(v.begin(), v.end(), c.error_type_mix.begin());
  } else if (kv.has("gen.error_rate")) {
    c.error_type_mix = analysis_error_mix(kv.get_double("gen.error_rate", 0.33));
  }
  c.weak_label_flip_rate = kv.get_double("gen.weak_label_flip_rate", c.weak_label_flip_rate);
  c.rare_utterance_rate = kv.get_double("gen.rare_utterance_rate", c.rare_utterance_rate);
  c.rewrite_revert_rate = kv.get_double("gen.rewrite_revert_rate", c.rewrite_revert_rate);
  c.error_persist_rate = kv.get_double("gen.error_persist_rate", c.error_persist_rate);
  c.nbest = sz("gen.nbest", c.nbest);
  c.max_query_len = sz("gen.max_query_len", c.max_query_len);
  c.utterance_max_len = sz("gen.utterance_max_len", c.utterance_max_len);
  c.max_title_len = sz("gen.max_title_len", c.max_title_len);
  c.max_session_len = sz("gen.max_session_len", c.max_session_len);
  c.max_slots = sz("gen.max_slots", c.max_slots);
  c.train_sessions = sz("gen.train_sessions", c.train_sessions);
  c.valid_sessions = sz("gen.valid_sessions", c.valid_sessions);
  c.test_sessions = sz("gen.test_sessions", c.test_sessions);
  c.seed = static_cast<std::uint64_t>(kv.get_int("gen.seed", static_cast<long long>(c.seed)));
  return c;
}

void GeneratorConfig::to_kv(KvConfig& kv) const {
  auto put = [&](const char* k, std::size_t v) { kv.set(k, static_cast<long long>(v)); };
  kv.set("gen.num_domains", static_cast<long long>(num_domains));
  kv.set("gen.num_intents", static_cast<long long>(num_intents));
  kv.set("gen.num_slots", static_cast<long long>(num_slots));
  kv.set("gen.zipf_exponent", zipf_exponent);
  put("gen.vocab_size", vocab_size);
  put("gen.rare_token_pool_size", rare_token_pool_size);
  kv.set("gen.asr_noise_rate", asr_noise_rate);
  std::string mix;
  for (std::size_t i = 0; i < error_type_mix.size(); ++i)
    mix += (i ? "," : "") + format_double(error_type_mix[i]);
  kv.set("gen.error_type_mix", mix);
  kv.set("gen.weak_label_flip_rate", weak_label_flip_rate);
  kv.set("gen.rare_utterance_rate", rare_utterance_rate);
  kv.set("gen.rewrite_revert_rate", rewrite_revert_rate);
  kv.set("gen.error_persist_rate", error_persist_rate);
  put("gen.nbest", nbest);
  put("gen.max_query_len", max_query_len);
  put("gen.utterance_max_len", utterance_max_len);
  put("gen.max_title_len", max_title_len);
  put("gen.max_session_len", max_session_len);
  put("gen.max_slots", max_slots);
  put("gen.train_sessions", train_sessions);
  put("gen.valid_sessions", valid_sessions);
  put("gen.test_sessions", test_sessions);
  kv.set("gen.seed", static_cast<long long>(seed));
}

TokenLayout::TokenLayout(const GeneratorConfig& cfg)
    : num_domains_(cfg.num_domains),
      num_intents_(cfg.num_intents),
      pool_size_((cfg.vocab_size - 3 - cfg.rare_token_pool_size) /
                 static_cast<std::size_t>(cfg.num_domains)),
      rare_size_(cfg.rare_token_pool_size),
      vocab_size_(cfg.vocab_size),
      rare_base_(static_cast<TokenId>(3 + pool_size_ * static_cast<std::size_t>(cfg.num_domains))) {}

TokenId TokenLayout::intent_keyword(int domain, int intent) const {
  return static_cast<TokenId>(3 + pool_size_ * static_cast<std::size_t>(domain) +
                              static_cast<std::size_t>(intent));
}

TokenId TokenLayout::content_token(int domain, std::size_t k) const {
  return static_cast<TokenId>(3 + pool_size_ * static_cast<std::size_t>(domain) +
                              static_cast<std::size_t>(num_intents_) + k);
}

TokenId TokenLayout::rare_token(std::size_t k) const {
  return static_cast<TokenId>(rare_base_ + static_cast<TokenId>(k));
}

bool TokenLayout::in_domain_pool(TokenId id, int domain) const {
  const auto base = static_cast<TokenId>(3 + pool_size_ * static_cast<std::size_t>(domain));
  return id >= base && id < base + static_cast<TokenId>(pool_size_);
}

bool TokenLayout::in_rare_pool(TokenId id) const {
  return id >= rare_base_ && id < rare_base_ + static_cast<TokenId>(rare_size_);
}

std::optional<int> TokenLayout::domain_of(TokenId id) const {
  if (id < 3 || id >= rare_base_) return std::nullopt;
  return static_cast<int>(static_cast<std::size_t>(id - 3) / pool_size_);
}

std::optional<int> TokenLayout::intent_of_keyword(TokenId id) const {
  auto d = domain_of(id);
  if (!d) return std::nullopt;
  const auto offset = static_cast<std::size_t>(id - 3) - pool_size_ * static_cast<std::size_t>(*d);
  if (offset < static_cast<std::size_t>(num_intents_)) return static_cast<int>(offset);
  return std::nullopt;
}

Vocab TokenLayout::vocab() const {
  Vocab v;
  for (std::size_t id = 3; id < vocab_size_; ++id) {
    const auto tid = static_cast<TokenId>(id);
    std::string name;
    if (auto d = domain_of(tid)) {
      if (auto i = intent_of_keyword(tid))
        name = "d" + std::to_string(*d) + ".i" + std::to_string(*i);
      else
        name = "d" + std::to_string(*d) + ".w" +
               std::to_string(id - 3 - pool_size_ * static_cast<std::size_t>(*d) -
                              static_cast<std::size_t>(num_intents_));
    } else if (in_rare_pool(tid)) {
      name = "rare" + std::to_string(id - static_cast<std::size_t>(rare_base_));
    } else {
      name = "spare" + std::to_string(id);
    }
    v.add(name);
  }
  return v;
}

std::vector<double> zipf_probabilities(double alpha, int num_domains) {
  if (!(alpha > 0.0)) throw ConfigError("zipf exponent must be > 0");
  if (num_domains < 2) throw ConfigError("need at least 2 domains");
  std::vector<double> p(static_cast<std::size_t>(num_domains));
  double total = 0.0;
  for (int k = 1; k <= num_domains; ++k) {
    p[static_cast<std::size_t>(k - 1)] = std::pow(static_cast<double>(k), -alpha);
    total += p[static_cast<std::size_t>(k - 1)];
  }
  for (double& v : p) v /= total;
  return p;
}

int sample_domain(Rng& rng, double alpha, int num_domains) {
  const auto p = zipf_probabilities(alpha, num_domains);
  double u = rng.uniform();
  for (std::size_t k = 0; k < p.size(); ++k) {
    u -= p[k];
    if (u < 0.0) return static_cast<int>(k);
  }
  return num_domains - 1;
}

Utterance sample_utterance(Rng& rng, const TokenLayout& layout, int domain, bool rare,
                           std::size_t max_len) {
  Utterance u;
  const std::size_t len = 2 + rng.index(max_len - 1);
  u.intent = static_cast<int>(rng.index(static_cast<std::size_t>(
      layout.domain_pool_size() - layout.content_pool_size())));
  u.tokens.resize(len);
  u.tokens[0] = layout.intent_keyword(domain, u.intent);
  for (std::size_t i = 1; i < len; ++i)
    u.tokens[i] = layout.content_token(domain, rng.index(layout.content_pool_size()));
  if (rare) {
    // ceil(len/2) of the non-keyword positions come from the rare pool.
    std::vector<std::size_t> positions(len - 1);
    std::iota(positions.begin(), positions.end(), std::size_t{1});
    for (std::size_t i = positions.size(); i > 1; --i)
      std::swap(positions[i - 1], positions[rng.index(i)]);
    const std::size_t need = (len + 1) / 2;
    for (std::size_t i = 0; i < need; ++i)
      u.tokens[positions[i]] = layout.rare_token(rng.index(layout.rare_pool_size()));
  }
  return u;
}

TokenSeq substitute_tokens(const TokenSeq& tokens, double noise_rate, std::size_t vocab_size,
                           Rng& rng, std::vector<bool>* changed) {
  TokenSeq out = tokens;
  if (changed) changed->assign(tokens.size(), false);
  const std::size_t choices = vocab_size - 4;  // non-reserved ids except the original
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!rng.bernoulli(noise_rate)) continue;
    auto pick = static_cast<TokenId>(3 + rng.index(choices));
    if (pick >= tokens[i]) ++pick;
    out[i] = pick;
    if (changed) (*changed)[i] = true;
  }
  return out;
}

std::size_t edit_distance(const TokenSeq& a, const TokenSeq& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

namespace {

void sort_by_distance(std::vector<TokenSeq>& hyps, const TokenSeq& ref) {
  std::stable_sort(hyps.begin(), hyps.end(), [&](const TokenSeq& x, const TokenSeq& y) {
    return edit_distance(x, ref) < edit_distance(y, ref);
  });
}

}  // namespace

QueryBundle corrupt_asr(const TokenSeq& tokens, double noise_rate, std::size_t k,
                        std::size_t vocab_size, double revert_fraction, Rng& rng) {
  if (k < 1) throw ContractError("n-best size must be >= 1");
  QueryBundle b;
  std::vector<bool> changed;
  b.original = substitute_tokens(tokens, noise_rate, vocab_size, rng, &changed);
  for (std::size_t i = 0; i < k; ++i)
    b.nbest.push_back(substitute_tokens(tokens, noise_rate, vocab_size, rng));
  sort_by_distance(b.nbest, b.original);
  b.final_query = b.original;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (changed[i] && rng.bernoulli(revert_fraction)) b.final_query[i] = tokens[i];
  return b;
}

TurnOutcome simulate_turn_outcome(const ErrorPlan& plan, Rng& rng) {
  if (plan.error_type == ErrorType::kNone) return {1, UserAction::kPlayThrough};
  static constexpr UserAction kActions[] = {UserAction::kRepeat, UserAction::kRephrase,
                                            UserAction::kInterrupt, UserAction::kAbandon};
  return {0, kActions[rng.index(4)]};
}

int weak_label_rules(const Turn& turn, const Turn* next) {
  if (turn.action == UserAction::kInterrupt || turn.action == UserAction::kAbandon) return 0;
  if (next && next->interval_s < kRuleWindowSeconds) {
    if (next->bundle.final_query == turn.bundle.final_query) return 0;
    if (next->nlu.domain == turn.nlu.domain && next->nlu.intent == turn.nlu.intent) return 0;
  }
  return 1;
}

int weak_label(const Turn& turn, const Turn* next, double flip_rate, Rng& rng) {
  const int rule = weak_label_rules(turn, next);
  return rng.bernoulli(flip_rate) ? 1 - rule : rule;
}

namespace {

struct Topic {
  int domain = 0;
  int intent = 0;
  bool rare = false;
  TokenSeq utterance;
};

Topic new_topic(const GeneratorConfig& cfg, const TokenLayout& layout, Rng& rng) {
  Topic t;
  t.domain = sample_domain(rng, cfg.zipf_exponent, cfg.num_domains);
  t.rare = rng.bernoulli(cfg.rare_utterance_rate);
  Utterance u = sample_utterance(rng, layout, t.domain, t.rare, cfg.utterance_max_len);
  t.intent = u.intent;
  t.utterance = std::move(u.tokens);
  return t;
}

std::vector<int> slots_for(const GeneratorConfig& cfg, const TokenSeq& q) {
  std::vector<int> slots;
  if (cfg.num_slots < 2) return slots;
  for (std::size_t i = 1; i < q.size() && slots.size() < cfg.max_slots; ++i)
    slots.push_back(1 + static_cast<int>(q[i] % (cfg.num_slots - 1)));
  return slots;
}

// What the understanding module makes of a query: the leading intent keyword
// if present, otherwise the domain of the first in-domain token and a guess.
NluResult understand(const GeneratorConfig& cfg, const TokenLayout& layout, const TokenSeq& q,
                     Rng& rng) {
  NluResult n;
  if (auto intent = layout.intent_of_keyword(q[0])) {
    n.domain = *layout.domain_of(q[0]);
    n.intent = *intent;
  } else {
    std::optional<int> d;
    for (TokenId id : q)
      if ((d = layout.domain_of(id))) break;
    n.domain = d ? *d : static_cast<int>(rng.index(static_cast<std::size_t>(cfg.num_domains)));
    n.intent = static_cast<int>(rng.index(static_cast<std::size_t>(cfg.num_intents)));
  }
  n.slots = slots_for(cfg, q);
  return n;
}

TokenSeq retrieve_title(const GeneratorConfig& cfg, const TokenLayout& layout, const NluResult& nlu,
                        const TokenSeq& query, bool wrong_item, Rng& rng) {
  TokenSeq title{layout.intent_keyword(nlu.domain, nlu.intent)};
  if (!wrong_item) {
    for (std::size_t i = 1; i < query.size() && title.size() < 4; ++i) title.push_back(query[i]);
  }
  const std::size_t fillers = (wrong_item ? 3 : 1) + rng.index(3);
  for (std::size_t i = 0; i < fillers && title.size() < cfg.max_title_len; ++i) {
    TokenId t = layout.content_token(nlu.domain, rng.index(layout.content_pool_size()));
    if (wrong_item) {
      // A different item: avoid the words the user asked for.
      for (int tries = 0; tries < 8 && std::find(query.begin(), query.end(), t) != query.end(); ++tries)
        t = layout.content_token(nlu.domain, rng.index(layout.content_pool_size()));
    }
    title.push_back(t);
  }
  return title;
}

QueryBundle clean_bundle(const GeneratorConfig& cfg, const TokenSeq& spoken, Rng& rng) {
  QueryBundle b;
  b.original = spoken;
  b.final_query = spoken;
  b.nbest.push_back(spoken);
  std::vector<TokenSeq> alternatives;
  for (std::size_t i = 1; i < cfg.nbest; ++i)
    alternatives.push_back(substitute_tokens(spoken, cfg.asr_noise_rate, cfg.vocab_size, rng));
  sort_by_distance(alternatives, spoken);
  for (auto& a : alternatives) b.nbest.push_back(std::move(a));
  return b;
}

QueryBundle misrecognized_bundle(const GeneratorConfig& cfg, const TokenSeq& spoken, Rng& rng) {
  QueryBundle b = corrupt_asr(spoken, cfg.asr_noise_rate, cfg.nbest, cfg.vocab_size,
                              cfg.rewrite_revert_rate, rng);
  if (b.original == spoken) {
    const std::size_t pos = rng.index(spoken.size());
    std::vector<bool> ignored;
    TokenSeq forced = substitute_tokens(TokenSeq{spoken[pos]}, 1.0, cfg.vocab_size, rng, &ignored);
    b.original[pos] = forced[0];
    b.final_query[pos] = forced[0];
  }
  if (b.final_query == spoken) {
    // The rewriter must not undo every substitution, or nothing went wrong.
    for (std::size_t i = 0; i < spoken.size(); ++i) {
      if (b.original[i] != spoken[i]) {
        b.final_query[i] = b.original[i];
        break;
      }
    }
  }
  return b;
}

double sample_interval(UserAction previous, Rng& rng) {
  switch (previous) {
    case UserAction::kRepeat:
    case UserAction::kRephrase:
    case UserAction::kInterrupt:
      return std::round(rng.uniform(1.0, kRuleWindowSeconds - 1.0) * 10.0) / 10.0;
    default:
      return std::round(rng.uniform(kRuleWindowSeconds, 600.0) * 10.0) / 10.0;
  }
}

}  // namespace

GeneratedSession generate_session(const GeneratorConfig& cfg, const TokenLayout& layout,
                                  std::string session_id, Rng& rng) {
  GeneratedSession g;
  g.session.session_id = std::move(session_id);
  const std::size_t target = 1 + rng.index(cfg.max_session_len);

  Topic topic = new_topic(cfg, layout, rng);
  for (std::size_t i = 0; i < cfg.max_session_len; ++i) {
    const Turn* prev = i ? &g.session.turns.back() : nullptr;
    const UserAction prev_action = prev ? prev->action : UserAction::kNone;
    if (prev && i >= target && prev_action != UserAction::kRepeat &&
        prev_action != UserAction::kRephrase)
      break;
    if (prev_action == UserAction::kAbandon) break;

    Turn turn;
    ErrorPlan plan;
    plan.affected_turn = i;
    TokenSeq spoken;

    if (prev_action == UserAction::kRepeat) {
      // Same words again; the system repeats its behaviour, so does the error.
      plan = g.plans.back();
      plan.affected_turn = i;
      spoken = g.clean_utterance.back();
      turn = *prev;
      if (plan.error_type == ErrorType::kAsr) {
        QueryBundle b = misrecognized_bundle(cfg, spoken, rng);
        turn.bundle.original = b.original;
        turn.bundle.nbest = b.nbest;
      } else {
        turn.bundle = clean_bundle(cfg, spoken, rng);
      }
      turn.bundle.final_query = prev->bundle.final_query;
    } else {
      if (prev_action == UserAction::kRephrase) {
        Utterance u;
        do {
          u = sample_utterance(rng, layout, topic.domain, topic.rare, cfg.utterance_max_len);
        } while (u.intent != topic.intent);
        topic.utterance = std::move(u.tokens);
        plan.error_type = rng.bernoulli(cfg.error_persist_rate)
                              ? g.plans.back().error_type
                              : sample_error(rng, cfg.error_type_mix);
      } else {
        if (prev) topic = new_topic(cfg, layout, rng);
        plan.error_type = sample_error(rng, cfg.error_type_mix);
      }
      plan.rare_utterance = topic.rare;

      spoken = topic.utterance;
      if (plan.error_type == ErrorType::kUser) {
        // No explicit intent: the keyword is replaced by an ordinary word.
        spoken[0] = layout.content_token(topic.domain, rng.index(layout.content_pool_size()));
      }
      turn.bundle = plan.error_type == ErrorType::kAsr ? misrecognized_bundle(cfg, spoken, rng)
                                                        : clean_bundle(cfg, spoken, rng);
      if (plan.error_type == ErrorType::kAsr || plan.error_type == ErrorType::kUser) {
        turn.nlu = understand(cfg, layout, turn.bundle.final_query, rng);
      } else {
        turn.nlu.domain = topic.domain;
        turn.nlu.intent = topic.intent;
        turn.nlu.slots = slots_for(cfg, turn.bundle.final_query);
      }
      if (plan.error_type == ErrorType::kNlu) {
        if (cfg.num_intents < 2 || rng.bernoulli(0.5)) {
          int d = static_cast<int>(rng.index(static_cast<std::size_t>(cfg.num_domains - 1)));
          turn.nlu.domain = d >= topic.domain ? d + 1 : d;
          turn.nlu.intent = static_cast<int>(rng.index(static_cast<std::size_t>(cfg.num_intents)));
        } else {
          int in = static_cast<int>(rng.index(static_cast<std::size_t>(cfg.num_intents - 1)));
          turn.nlu.intent = in >= topic.intent ? in + 1 : in;
        }
      }
      turn.response.title = retrieve_title(cfg, layout, turn.nlu, turn.bundle.final_query,
                                           plan.error_type == ErrorType::kIr, rng);
      turn.response.voice_response = {layout.intent_keyword(turn.nlu.domain, turn.nlu.intent)};
    }

    turn.interval_s = prev ? sample_interval(prev_action, rng) : 0.0;
    TurnOutcome outcome = simulate_turn_outcome(plan, rng);
    if (i + 1 == cfg.max_session_len &&
        (outcome.action == UserAction::kRepeat || outcome.action == UserAction::kRephrase)) {
      // No room for a follow-up turn: the user gives up instead.
      outcome.action = rng.bernoulli(0.5) ? UserAction::kInterrupt : UserAction::kAbandon;
    }
    turn.action = outcome.action;

    g.session.turns.push_back(std::move(turn));
    g.plans.push_back(plan);
    g.ground_truth.push_back(outcome.satisfied);
    g.true_domain.push_back(topic.domain);
    g.true_intent.push_back(topic.intent);
    g.clean_utterance.push_back(std::move(spoken));
  }
  return g;
}

LabeledSession label_session(const GeneratorConfig& cfg, const GeneratedSession& gen,
                             bool with_ground_truth, Rng& rng) {
  const std::size_t n = gen.session.turns.size();
  const std::size_t c = rng.index(n);
  LabeledSession r;
  r.session.session_id = gen.session.session_id;
  r.session.turns.assign(gen.session.turns.begin(),
                         gen.session.turns.begin() + static_cast<std::ptrdiff_t>(c + 1));
  r.session.current_index = c;
  const Turn* next = c + 1 < n ? &gen.session.turns[c + 1] : nullptr;
  r.label = weak_label(gen.session.turns[c], next, cfg.weak_label_flip_rate, rng);
  r.domain_intent = joint_domain_intent(gen.true_domain[c], gen.true_intent[c], cfg.num_intents);
  r.slices.error_type = gen.plans[c].error_type;
  r.slices.rare = gen.plans[c].rare_utterance;
  r.slices.domain = gen.true_domain[c];
  if (with_ground_truth) r.ground_truth = gen.ground_truth[c];
  return r;
}

Corpus generate_corpus(const GeneratorConfig& cfg) {
  cfg.validate();
  const TokenLayout layout(cfg);
  Corpus corpus;
  auto run = [&](const char* name, std::uint64_t split, std::size_t count, bool gt,
                 std::vector<LabeledSession>& out) {
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      Rng rng = Rng::stream(cfg.seed, (split << 32) | i);
      char id[48];
      std::snprintf(id, sizeof(id), "%s-%06zu", name, i);
      GeneratedSession g = generate_session(cfg, layout, id, rng);
      out.push_back(label_session(cfg, g, gt, rng));
    }
  };
  run("train", 0, cfg.train_sessions, false, corpus.train);
  run("valid", 1, cfg.valid_sessions, false, corpus.valid);
  run("test", 2, cfg.test_sessions, true, corpus.test);
  return corpus;
}

std::string CorpusStats::to_json() const {
  nlohmann::json j;
  j["sessions"] = sessions;
  j["per_domain"] = per_domain;
  j["rare"] = rare;
  j["labels"] = {{"dissatisfied", labels[0]}, {"satisfied", labels[1]}};
  j["ground_truth"] = {{"dissatisfied", ground_truth[0]}, {"satisfied", ground_truth[1]}};
  nlohmann::json errs;
  for (int e = 0; e < kNumErrorTypes; ++e)
    errs[std::string(to_string(static_cast<ErrorType>(e)))] = errors[static_cast<std::size_t>(e)];
  j["errors"] = errs;
  j["weak_true_disagree"] = weak_true_disagree;
  return j.dump(2);
}

CorpusStats corpus_stats(const std::vector<LabeledSession>& stream, int num_domains) {
  CorpusStats s;
  s.per_domain.assign(static_cast<std::size_t>(std::max(num_domains, 0)), 0);
  for (const auto& r : stream) {
    ++s.sessions;
    if (r.slices.domain >= 0 && r.slices.domain < num_domains)
      ++s.per_domain[static_cast<std::size_t>(r.slices.domain)];
    if (r.slices.rare) ++s.rare;
    ++s.labels[static_cast<std::size_t>(r.label)];
    ++s.errors[error_index(r.slices.error_type)];
    if (r.ground_truth) {
      ++s.ground_truth[static_cast<std::size_t>(*r.ground_truth)];
      if (*r.ground_truth != r.label) ++s.weak_true_disagree;
    }
  }
  return s;
}

void write_corpus_dir(const std::string& dir, const GeneratorConfig& cfg, const Corpus& corpus) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  KvConfig kv;
  cfg.to_kv(kv);
  kv.save(fs::path(dir) / "generator.cfg");
  auto split = [&](const char* name, const std::vector<LabeledSession>& records) {
    write_corpus_file(fs::path(dir) / (std::string(name) + ".jsonl"), records);
    std::ofstream stats(fs::path(dir) / (std::string(name) + ".stats.json"), std::ios::binary);
    stats << corpus_stats(records, cfg.num_domains).to_json() << '\n';
  };
  split("train", corpus.train);
  split("valid", corpus.valid);
  split("test", corpus.test);
}

LoadedCorpus read_corpus_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  LoadedCorpus out;
  out.config = GeneratorConfig::from_kv(KvConfig::load(fs::path(dir) / "generator.cfg"));
  out.corpus.train = read_corpus_file(fs::path(dir) / "train.jsonl");
  out.corpus.valid = read_corpus_file(fs::path(dir) / "valid.jsonl");
  out.corpus.test = read_corpus_file(fs::path(dir) / "test.jsonl");
  return out;
}

}  // namespace abm::synth
