#pragma once

#include <filesystem>
#include <string>

#include "abm/domain.hpp"
#include "abm/rng.hpp"

namespace abm::testing {

inline Turn make_turn(TokenSeq q, int domain, int intent, TokenSeq title, double interval = 0.0) {
  Turn t;
  t.bundle.original = q;
  t.bundle.nbest = {q, q};
  t.bundle.final_query = q;
  t.nlu.domain = domain;
  t.nlu.intent = intent;
  t.nlu.slots = {1, 2};
  t.response.title = std::move(title);
  t.interval_s = interval;
  t.action = UserAction::kPlayThrough;
  return t;
}

inline Session make_session(std::size_t turns, std::size_t current) {
  Session s;
  s.session_id = "s";
  for (std::size_t i = 0; i < turns; ++i)
    s.turns.push_back(make_turn({static_cast<TokenId>(10 + i), 11}, 1, 2, {12, 13, 14}, i ? 5.0 : 0.0));
  s.current_index = current;
  return s;
}

inline Limits small_limits() {
  Limits l;
  l.vocab_size = 100;
  l.num_domains = 6;
  l.num_intents = 4;
  l.num_slots = 16;
  return l;
}

// Random example with ids valid for a default AbmConfig-sized vocabulary.
inline TrainingExample random_example(Rng& rng, std::size_t turns, std::size_t vocab, int domains, int intents,
                                      int slots, std::size_t nbest = 3) {
  auto seq = [&](std::size_t max_len) {
    TokenSeq q(1 + rng.index(max_len));
    for (auto& t : q) t = static_cast<TokenId>(3 + rng.index(vocab - 3));
    return q;
  };
  LabeledSession r;
  r.session.session_id = "r" + std::to_string(rng.next_u64() % 100000);
  const std::size_t n = 1 + rng.index(turns + 2);
  for (std::size_t i = 0; i < n; ++i) {
    Turn t;
    t.bundle.original = seq(6);
    for (std::size_t k = 0; k < nbest; ++k) t.bundle.nbest.push_back(seq(6));
    t.bundle.final_query = seq(6);
    t.nlu.domain = static_cast<int>(rng.index(static_cast<std::size_t>(domains)));
    t.nlu.intent = static_cast<int>(rng.index(static_cast<std::size_t>(intents)));
    for (std::size_t k = rng.index(4); k > 0; --k) t.nlu.slots.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(slots))));
    t.response.title = seq(10);
    t.interval_s = i ? rng.uniform(0.0, 300.0) : 0.0;
    t.action = UserAction::kPlayThrough;
    r.session.turns.push_back(std::move(t));
  }
  r.session.current_index = n - 1;
  r.label = static_cast<int>(rng.index(2));
  r.domain_intent = static_cast<int>(rng.index(static_cast<std::size_t>(domains * intents)));
  return make_example(r, turns);
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("abm_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace abm::testing
