#include "abm/model.hpp"

#include <algorithm>

namespace abm {

using nn::Graph;
using nn::Mask;
using nn::Parameter;
using nn::Shape;
using nn::Tensor;
using nn::Var;

AbmConfig AbmConfig::paper_scale() {
  AbmConfig c;
  c.embed_dim = 320;
  c.heads = 8;
  c.layers_asr = c.layers_reply = c.layers_session = 4;
  c.turns = 5;
  return c;
}

void AbmConfig::validate() const {
  if (embed_dim == 0 || heads == 0 || embed_dim % heads != 0)
    throw ConfigError("model.E must be a positive multiple of model.heads");
  if (layers_asr < 1 || layers_reply < 1 || layers_session < 1)
    throw ConfigError("every sub-module needs at least one layer");
  if (turns < 1) throw ConfigError("model.turns must be >= 1");
  if (nbest < 1) throw ConfigError("model.nbest must be >= 1");
  if (vocab_size < 4) throw ConfigError("model.vocab_size too small");
  if (num_domains < 1 || num_intents < 1 || num_slots < 1)
    throw ConfigError("model domain/intent/slot counts must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model.dropout must be in [0,1)");
  if (ffn_multiplier < 1) throw ConfigError("model.ffn_multiplier must be >= 1");
}

AbmConfig AbmConfig::from_kv(const KvConfig& kv, const AbmConfig& d) {
  AbmConfig c = d;
  auto sz = [&](const char* key, std::size_t fallback) {
    const long long v = kv.get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw ConfigError(std::string(key) + " must be >= 0");
    return static_cast<std::size_t>(v);
  };
  c.embed_dim = sz("model.E", c.embed_dim);
  c.heads = sz("model.heads", c.heads);
  const std::size_t layers = sz("model.layers", 0);
  if (layers) c.layers_asr = c.layers_reply = c.layers_session = layers;
  c.layers_asr = sz("model.n1", c.layers_asr);
  c.layers_reply = sz("model.n2", c.layers_reply);
  c.layers_session = sz("model.n3", c.layers_session);
  c.turns = sz("model.L", c.turns);
  c.nbest = sz("model.K", c.nbest);
  c.vocab_size = sz("model.vocab_size", c.vocab_size);
  c.num_domains = static_cast<int>(kv.get_int("model.num_domains", c.num_domains));
  c.num_intents = static_cast<int>(kv.get_int("model.num_intents", c.num_intents));
  c.num_slots = static_cast<int>(kv.get_int("model.num_slots", c.num_slots));
  c.max_query_len = sz("model.max_query_len", c.max_query_len);
  c.max_title_len = sz("model.max_title_len", c.max_title_len);
  c.max_slots = sz("model.max_slots", c.max_slots);
  c.ffn_multiplier = sz("model.ffn_multiplier", c.ffn_multiplier);
  c.dropout = kv.get_double("model.dropout", c.dropout);
  c.init_seed = static_cast<std::uint64_t>(kv.get_int("model.init_seed", static_cast<long long>(c.init_seed)));
  return c;
}

void AbmConfig::to_kv(KvConfig& kv) const {
  auto put = [&](const char* k, std::size_t v) { kv.set(k, static_cast<long long>(v)); };
  put("model.E", embed_dim);
  put("model.heads", heads);
  put("model.n1", layers_asr);
  put("model.n2", layers_reply);
  put("model.n3", layers_session);
  put("model.L", turns);
  put("model.K", nbest);
  put("model.vocab_size", vocab_size);
  kv.set("model.num_domains", static_cast<long long>(num_domains));
  kv.set("model.num_intents", static_cast<long long>(num_intents));
  kv.set("model.num_slots", static_cast<long long>(num_slots));
  put("model.max_query_len", max_query_len);
  put("model.max_title_len", max_title_len);
  put("model.max_slots", max_slots);
  put("model.ffn_multiplier", ffn_multiplier);
  kv.set("model.dropout", dropout);
  kv.set("model.init_seed", static_cast<long long>(init_seed));
}

template <typename T>
AbmModel<T>::AbmModel(const AbmConfig& config) : config_(config) {
  config_.validate();
  Rng init(config_.init_seed);
  const std::size_t e = config_.embed_dim;
  auto table = [&](const std::string& name, std::size_t rows, double stddev) {
    Parameter<T>& p = store_.add(name, Shape{rows, e});
    nn::init_normal(p, stddev, init);
    return &p;
  };
  auto blocks = [&](const std::string& prefix, std::size_t n) {
    std::vector<nn::EncoderBlockParams<T>> out;
    for (std::size_t i = 0; i < n; ++i)
      out.push_back(nn::EncoderBlockParams<T>::create(store_, prefix + ".block" + std::to_string(i), e,
                                                      e * config_.ffn_multiplier, init));
    return out;
  };
  token_table_ = table("emb.token", config_.vocab_size, 0.1);
  nlu_table_ = table("emb.nlu", config_.nlu_rows(), 0.1);
  interval_table_ = table("emb.interval", kNumIntervalBuckets, 0.1);
  sep_embedding_ = table("emb.sep", 1, 0.1);
  asr_pos_ = table("asr.pos", config_.asr_positions(), 0.05);
  asr_segment_ = table("asr.segment", 3, 0.05);
  asr_blocks_ = blocks("asr", config_.layers_asr);
  reply_pos_ = table("reply.pos", config_.reply_positions(), 0.05);
  reply_segment_ = table("reply.segment", 3, 0.05);
  reply_blocks_ = blocks("reply", config_.layers_reply);
  session_pos_ = table("session.pos", config_.session_positions(), 0.05);
  session_segment_ = table("session.segment", 4, 0.05);
  session_turn_ = table("session.turn", config_.turns, 0.05);
  session_blocks_ = blocks("session", config_.layers_session);
  fusion_w_ = &store_.add("fusion.w", Shape{3 * e, 1});
  nn::init_glorot(*fusion_w_, init);
  fusion_b_ = &store_.add("fusion.b", Shape{1});
  intent_w_ = &store_.add("intent_head.w", Shape{e, config_.num_classes()});
  nn::init_glorot(*intent_w_, init);
  intent_b_ = &store_.add("intent_head.b", Shape{config_.num_classes()});
}

template <typename T>
Var AbmModel<T>::embed_sum(Graph<T>& g, Var rows, std::size_t positions_limit, Parameter<T>* pos,
                           Parameter<T>* seg, std::span<const int> segments, Parameter<T>* extra,
                           std::span<const int> extra_ids, const char* what) const {
  const std::size_t n = g.value(rows).rows();
  if (n > positions_limit)
    throw ContractError(std::string(what) + ": length overflow (" + std::to_string(n) + " > " +
                        std::to_string(positions_limit) + " positions)");
  std::vector<int> positions(n);
  for (std::size_t i = 0; i < n; ++i) positions[i] = static_cast<int>(i);
  Var x = nn::add(g, rows, nn::gather_rows(g, g.param(*pos), std::span<const int>(positions)));
  x = nn::add(g, x, nn::gather_rows(g, g.param(*seg), segments));
  if (extra) x = nn::add(g, x, nn::gather_rows(g, g.param(*extra), extra_ids));
  return x;
}

template <typename T>
Var AbmModel<T>::run_blocks(Graph<T>& g, Var x, const std::vector<nn::EncoderBlockParams<T>>& blocks,
                            const Mask* mask, const RunOptions& run) const {
  nn::BlockOptions opt;
  opt.heads = config_.heads;
  opt.dropout = config_.dropout;
  opt.training = run.training;
  opt.rng = run.rng;
  opt.key_mask = mask;
  for (const auto& b : blocks) x = nn::encoder_block(g, x, b, opt);
  return x;
}

template <typename T>
typename AbmModel<T>::AsrEncoding AbmModel<T>::encode_asr_query_match(Graph<T>& g, const QueryBundle& bundle,
                                                                      const RunOptions& run) const {
  std::vector<int> ids;
  std::vector<int> segments;
  auto append = [&](const TokenSeq& q, int segment) {
    if (q.empty()) throw ContractError("asr module: empty query");
    ids.insert(ids.end(), q.begin(), q.end());
    segments.insert(segments.end(), q.size(), segment);
  };
  append(bundle.original, kSegmentOriginal);
  for (const auto& h : bundle.nbest) append(h, kSegmentNbest);
  append(bundle.final_query, kSegmentFinal);

  AsrEncoding out;
  const Var rows = nn::gather_rows(g, g.param(*token_table_), std::span<const int>(ids));
  out.s_e = embed_sum(g, rows, config_.asr_positions(), asr_pos_, asr_segment_, segments, nullptr, {},
                      "asr module");
  const Var x = nn::dropout(g, out.s_e, config_.dropout, run.rng, run.training);
  out.o_e = run_blocks(g, x, asr_blocks_, nullptr, run);
  out.t_q = nn::reduce_max_rows(g, out.o_e);
  return out;
}

template <typename T>
typename AbmModel<T>::ReplyEncoding AbmModel<T>::encode_query_reply_match(Graph<T>& g, const TokenSeq& final_query,
                                                                          const NluResult& nlu, const TokenSeq& title,
                                                                          const RunOptions& run) const {
  if (final_query.empty() || title.empty()) throw ContractError("reply module: empty query or title");
  std::vector<int> nlu_ids{nlu_domain_row(nlu.domain), nlu_intent_row(nlu.intent)};
  if (nlu.domain < 0 || nlu.domain >= config_.num_domains || nlu.intent < 0 || nlu.intent >= config_.num_intents)
    throw ContractError("reply module: NLU id out of range");
  for (int s : nlu.slots) {
    if (s < 0 || s >= config_.num_slots) throw ContractError("reply module: slot id out of range");
    nlu_ids.push_back(nlu_slot_row(s));
  }
  std::vector<int> q(final_query.begin(), final_query.end());
  std::vector<int> r(title.begin(), title.end());
  std::vector<int> segments;
  segments.insert(segments.end(), q.size(), 0);
  segments.insert(segments.end(), nlu_ids.size(), 1);
  segments.insert(segments.end(), r.size(), 2);

  ReplyEncoding out;
  const Var tokens = g.param(*token_table_);
  const Var rows = nn::concat_rows(g, {nn::gather_rows(g, tokens, std::span<const int>(q)),
                                       nn::gather_rows(g, g.param(*nlu_table_), std::span<const int>(nlu_ids)),
                                       nn::gather_rows(g, tokens, std::span<const int>(r))});
  out.e_p = embed_sum(g, rows, config_.reply_positions(), reply_pos_, reply_segment_, segments, nullptr, {},
                      "reply module");
  const Var x = nn::dropout(g, out.e_p, config_.dropout, run.rng, run.training);
  out.o_p = run_blocks(g, x, reply_blocks_, nullptr, run);
  out.t_r = nn::reduce_max_rows(g, out.o_p);
  return out;
}

template <typename T>
typename AbmModel<T>::SessionEncoding AbmModel<T>::encode_session(Graph<T>& g, const std::vector<WindowSlot>& window,
                                                                  const RunOptions& run) const {
  if (window.empty() || window.size() > config_.turns)
    throw ContractError("session module: window must hold 1.." + std::to_string(config_.turns) + " turns");
  if (window.back().padded) throw ContractError("session module: current turn is padding");

  // Each turn contributes [query tokens | domain, intent, slots | interval | SEP].
  std::vector<int> token_ids, nlu_ids, interval_ids;
  struct Source {
    int kind;
    int index;
  };
  std::vector<Source> order;
  SessionEncoding out;
  std::vector<int> segments, turn_ids;
  for (std::size_t i = 0; i < window.size(); ++i) {
    const WindowSlot& slot = window[i];
    const Turn& t = slot.turn;
    auto push = [&](int kind, int index, int segment) {
      order.push_back({kind, index});
      segments.push_back(segment);
      turn_ids.push_back(static_cast<int>(i));
      out.real.push_back(slot.padded ? 0 : 1);
    };
    if (slot.padded) {
      token_ids.push_back(t.bundle.final_query.empty() ? kPadId : t.bundle.final_query[0]);
      push(0, static_cast<int>(token_ids.size() - 1), 0);
      for (int k = 0; k < 2; ++k) {
        nlu_ids.push_back(0);
        push(1, static_cast<int>(nlu_ids.size() - 1), 1);
      }
      interval_ids.push_back(0);
      push(2, static_cast<int>(interval_ids.size() - 1), 2);
    } else {
      if (t.bundle.final_query.empty()) throw ContractError("session module: empty query");
      for (TokenId id : t.bundle.final_query) {
        token_ids.push_back(id);
        push(0, static_cast<int>(token_ids.size() - 1), 0);
      }
      if (t.nlu.domain < 0 || t.nlu.domain >= config_.num_domains || t.nlu.intent < 0 ||
          t.nlu.intent >= config_.num_intents)
        throw ContractError("session module: NLU id out of range");
      nlu_ids.push_back(nlu_domain_row(t.nlu.domain));
      push(1, static_cast<int>(nlu_ids.size() - 1), 1);
      nlu_ids.push_back(nlu_intent_row(t.nlu.intent));
      push(1, static_cast<int>(nlu_ids.size() - 1), 1);
      for (int s : t.nlu.slots) {
        if (s < 0 || s >= config_.num_slots) throw ContractError("session module: slot id out of range");
        nlu_ids.push_back(nlu_slot_row(s));
        push(1, static_cast<int>(nlu_ids.size() - 1), 1);
      }
      interval_ids.push_back(discretize_interval(t.interval_s));
      push(2, static_cast<int>(interval_ids.size() - 1), 2);
    }
    push(3, static_cast<int>(i), 3);
  }
  const int n_tok = static_cast<int>(token_ids.size());
  const int n_nlu = static_cast<int>(nlu_ids.size());
  const int n_int = static_cast<int>(interval_ids.size());
  const int offsets[4] = {0, n_tok, n_tok + n_nlu, n_tok + n_nlu + n_int};
  std::vector<int> permutation;
  permutation.reserve(order.size());
  for (const Source& s : order) permutation.push_back(offsets[s.kind] + s.index);

  std::vector<int> sep_ids(window.size(), 0);
  const Var stacked = nn::concat_rows(
      g, {nn::gather_rows(g, g.param(*token_table_), std::span<const int>(token_ids)),
          nn::gather_rows(g, g.param(*nlu_table_), std::span<const int>(nlu_ids)),
          nn::gather_rows(g, g.param(*interval_table_), std::span<const int>(interval_ids)),
          nn::gather_rows(g, g.param(*sep_embedding_), std::span<const int>(sep_ids))});
  const Var rows = nn::gather_rows(g, stacked, std::span<const int>(permutation));
  out.e_s = embed_sum(g, rows, config_.session_positions(), session_pos_, session_segment_, segments,
                      session_turn_, turn_ids, "session module");
  const Var x = nn::dropout(g, out.e_s, config_.dropout, run.rng, run.training);
  out.o_s = run_blocks(g, x, session_blocks_, &out.real, run);
  out.t_s = nn::reduce_max_rows(g, out.o_s, out.real);
  out.sep_index = permutation.size() - 1;
  const int sep_row = static_cast<int>(out.sep_index);
  out.sep_current = nn::gather_rows(g, out.o_s, std::span<const int>(&sep_row, 1));
  return out;
}

template <typename T>
Var AbmModel<T>::fuse_and_predict(Graph<T>& g, Var t_q, Var t_r, Var t_s) const {
  const Var joined = nn::concat_cols(g, {t_q, t_r, t_s});
  return nn::sigmoid(g, nn::linear(g, joined, g.param(*fusion_w_), g.param(*fusion_b_)));
}

template <typename T>
Var AbmModel<T>::encode_query(Graph<T>& g, const TokenSeq& tokens, int segment, const RunOptions& run) const {
  if (tokens.empty()) throw ContractError("contrastive encoder: empty query");
  std::vector<int> ids(tokens.begin(), tokens.end());
  std::vector<int> segments(ids.size(), segment);
  const Var rows = nn::gather_rows(g, g.param(*token_table_), std::span<const int>(ids));
  Var x = embed_sum(g, rows, config_.asr_positions(), asr_pos_, asr_segment_, segments, nullptr, {},
                    "contrastive encoder");
  x = nn::dropout(g, x, config_.dropout, run.rng, run.training);
  return nn::reduce_max_rows(g, run_blocks(g, x, asr_blocks_, nullptr, run));
}

template <typename T>
Var AbmModel<T>::domain_intent_logits(Graph<T>& g, Var sep_current) const {
  return nn::linear(g, sep_current, g.param(*intent_w_), g.param(*intent_b_));
}

template <typename T>
typename AbmModel<T>::Forward AbmModel<T>::forward(Graph<T>& g, const TrainingExample& ex,
                                                   const RunOptions& run) const {
  if (ex.window.empty()) throw ContractError("example has an empty window");
  const Turn& cur = ex.current();
  Forward f;
  f.asr = encode_asr_query_match(g, cur.bundle, run);
  f.session = encode_session(g, ex.window, run);
  f.reply = encode_query_reply_match(g, cur.bundle.final_query, cur.nlu, cur.response.title, run);
  f.p = fuse_and_predict(g, f.asr.t_q, f.reply.t_r, f.session.t_s);
  return f;
}

template <typename T>
ForwardTrace<T> AbmModel<T>::trace(const TrainingExample& ex, const RunOptions& run) const {
  Graph<T> g;
  const Forward f = forward(g, ex, run);
  ForwardTrace<T> t;
  t.s_e = g.value(f.asr.s_e);
  t.o_e = g.value(f.asr.o_e);
  t.t_q = g.value(f.asr.t_q);
  t.e_p = g.value(f.reply.e_p);
  t.o_p = g.value(f.reply.o_p);
  t.t_r = g.value(f.reply.t_r);
  t.e_s = g.value(f.session.e_s);
  t.o_s = g.value(f.session.o_s);
  t.t_s = g.value(f.session.t_s);
  t.sep_current = g.value(f.session.sep_current);
  t.sep_current.shape = Shape{config_.embed_dim};
  t.p = static_cast<double>(g.value(f.p).data[0]);
  return t;
}

template <typename T>
double AbmModel<T>::predict(const TrainingExample& ex) const {
  Graph<T> g;
  return static_cast<double>(g.value(forward(g, ex, RunOptions{}).p).data[0]);
}

template <typename T>
std::vector<Tensor<T>> AbmModel<T>::snapshot() const {
  std::vector<Tensor<T>> out;
  for (std::size_t i = 0; i < store_.size(); ++i) out.push_back(store_[i].value);
  return out;
}

template <typename T>
void AbmModel<T>::restore(const std::vector<Tensor<T>>& values) {
  if (values.size() != store_.size()) throw ShapeError("snapshot does not match the model");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].shape != store_[i].value.shape) throw ShapeError("snapshot shape mismatch for " + store_[i].name);
    store_[i].value = values[i];
  }
}

template <typename T>
Var main_loss(Graph<T>& g, const std::vector<Var>& probabilities, const std::vector<int>& labels) {
  if (probabilities.size() != labels.size() || probabilities.empty())
    throw ContractError("main_loss: one label per prediction");
  std::vector<Var> losses;
  losses.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    losses.push_back(nn::binary_cross_entropy(g, probabilities[i], labels[i]));
  return losses.size() == 1 ? losses[0] : nn::mean(g, losses);
}

template class AbmModel<float>;
template class AbmModel<double>;
template Var main_loss<float>(Graph<float>&, const std::vector<Var>&, const std::vector<int>&);
template Var main_loss<double>(Graph<double>&, const std::vector<Var>&, const std::vector<int>&);

}  // namespace abm
