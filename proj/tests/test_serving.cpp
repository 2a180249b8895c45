#include <filesystem>

#include "abm/checkpoint.hpp"
#include "abm/serving.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace abm;

namespace {

AbmConfig tiny_config() {
  AbmConfig c;
  c.embed_dim = 8;
  c.heads = 2;
  c.layers_asr = c.layers_reply = c.layers_session = 1;
  c.vocab_size = 60;
  return c;
}

}  // namespace

TEST_CASE("decision boundary") {
  CHECK(decide(0.9, 0.78).kind == DecisionKind::kRespond);
  CHECK(decide(0.5, 0.78).kind == DecisionKind::kClarify);
  CHECK(decide(0.78, 0.78).kind == DecisionKind::kClarify);
  CHECK(decide(std::nextafter(0.78, 1.0), 0.78).kind == DecisionKind::kRespond);
  CHECK(decide(0.0, std::nullopt).kind == DecisionKind::kRespond);
  CHECK(to_string(DecisionKind::kClarify) == "clarify");
  CHECK(to_string(DecisionKind::kRespond) == "respond");
}

TEST_CASE("staged and monolithic inference agree exactly") {
  AbmModel<float> model(tiny_config());
  Rng rng(5);
  for (int i = 0; i < 30; ++i) {
    const TrainingExample ex = testing::random_example(rng, 5, 60, 6, 4, 16);
    const double theta = rng.uniform(0.3, 0.7);
    const Decision s = infer_staged(model, ex, theta, "r" + std::to_string(i));
    const Decision m = infer_monolithic(model, ex, theta);
    CHECK(s.p == m.p);
    CHECK(s.kind == m.kind);
    CHECK(s.threshold == m.threshold);
  }
  AbmModel<double> wide(tiny_config());
  const TrainingExample ex = testing::random_example(rng, 5, 60, 6, 4, 16);
  CHECK(infer_staged(wide, ex, std::nullopt).p == infer_monolithic(wide, ex, std::nullopt).p);
}

TEST_CASE("stages must run in order") {
  AbmModel<float> model(tiny_config());
  Rng rng(6);
  const TrainingExample ex = testing::random_example(rng, 5, 60, 6, 4, 16);
  const Turn& cur = ex.current();
  StagedState<float> state;
  state.request_id = "req-1";
  CHECK_THROWS_WITH_AS(stage_session(model, state, ex.window), doctest::Contains("out-of-order stage call"),
                       ContractError);
  CHECK_THROWS_AS(stage_reply(model, state, cur.bundle.final_query, cur.nlu, cur.response.title, 0.5),
                  ContractError);
  CHECK(state.stage == Stage::kAwaitAsr);
  CHECK(!state.t_q);

  stage_asr(model, state, cur.bundle);
  CHECK(state.stage == Stage::kAwaitSession);
  const auto t_q = *state.t_q;
  CHECK_THROWS_AS(stage_asr(model, state, cur.bundle), ContractError);
  CHECK(state.t_q->data == t_q.data);
  CHECK_THROWS_AS(stage_reply(model, state, cur.bundle.final_query, cur.nlu, cur.response.title, 0.5),
                  ContractError);
  CHECK(!state.t_s);

  stage_session(model, state, ex.window);
  CHECK(state.stage == Stage::kAwaitReply);
  const Decision d = stage_reply(model, state, cur.bundle.final_query, cur.nlu, cur.response.title, 0.5);
  CHECK(state.stage == Stage::kDone);
  CHECK(state.p == d.p);
  CHECK_THROWS_AS(stage_reply(model, state, cur.bundle.final_query, cur.nlu, cur.response.title, 0.5),
                  ContractError);
  CHECK(state.decision->p == d.p);
}

TEST_CASE("the reply stage uses the cached encodings") {
  AbmModel<float> model(tiny_config());
  Rng rng(7);
  const TrainingExample ex = testing::random_example(rng, 5, 60, 6, 4, 16);
  const Turn& cur = ex.current();
  StagedState<float> state;
  stage_asr(model, state, cur.bundle);
  stage_session(model, state, ex.window);
  for (float& v : state.t_q->data) v += 1.0f;
  const Decision faulty = stage_reply(model, state, cur.bundle.final_query, cur.nlu, cur.response.title, 0.5);
  CHECK(faulty.p != infer_monolithic(model, ex, 0.5).p);
}

TEST_CASE("checkpoints round-trip byte for byte") {
  AbmConfig cfg = tiny_config();
  cfg.init_seed = 4;
  AbmModel<float> model(cfg);
  const auto bytes = checkpoint_bytes(model);
  const auto loaded = model_from_checkpoint<float>(bytes);
  CHECK(loaded->config() == cfg);
  CHECK(checkpoint_bytes(*loaded) == bytes);
  CHECK(loaded->params().checksum() == model.params().checksum());
  CHECK(model_id(bytes).size() == 16);
  CHECK(checkpoint_config(bytes) == cfg);

  const auto dir = testing::temp_dir("ckpt");
  save_checkpoint(model, dir / "m.ckpt");
  CHECK(read_file_bytes(dir / "m.ckpt") == bytes);
  const auto from_file = load_checkpoint<float>(dir / "m.ckpt");
  save_checkpoint(*from_file, dir / "again.ckpt");
  CHECK(read_file_bytes(dir / "again.ckpt") == bytes);

  Rng rng(8);
  const TrainingExample ex = testing::random_example(rng, 5, 60, 6, 4, 16);
  CHECK(from_file->predict(ex) == model.predict(ex));

  const std::string card = model_card(model);
  CHECK(card.find("emb.token") != std::string::npos);
  CHECK(card.find("model.E") != std::string::npos);

  AbmModel<double> wide(cfg);
  CHECK(checkpoint_bytes(wide) != bytes);
  CHECK(checkpoint_bytes(*model_from_checkpoint<double>(checkpoint_bytes(wide))) == checkpoint_bytes(wide));
}

TEST_CASE("damaged or mismatched checkpoints are rejected") {
  AbmModel<float> model(tiny_config());
  const auto bytes = checkpoint_bytes(model);
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{9}, bytes.size() / 2, bytes.size() - 1}) {
    const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + static_cast<long>(cut));
    CHECK_THROWS_AS(model_from_checkpoint<float>(truncated), ParseError);
  }
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_WITH_AS(model_from_checkpoint<float>(bad_magic), doctest::Contains("magic"), ParseError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(model_from_checkpoint<float>(trailing), ParseError);
  CHECK_THROWS_AS(model_from_checkpoint<double>(bytes), ParseError);

  AbmConfig other = tiny_config();
  other.embed_dim = 12;
  AbmModel<float> different(other);
  const auto before = different.params().checksum();
  CHECK_THROWS_AS(load_checkpoint_into(different, bytes), ShapeError);
  CHECK(different.params().checksum() == before);

  CHECK_THROWS_AS(read_file_bytes("/nonexistent/abm.ckpt"), std::exception);
}
