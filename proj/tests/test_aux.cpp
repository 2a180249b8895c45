#include <cmath>

#include "abm/aux_tasks.hpp"
#include "abm/gradcheck.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace abm;
using abm::nn::Graph;
using abm::nn::Tensor;
using abm::nn::Var;

namespace {

using Rows = std::vector<std::vector<double>>;

// Independent evaluation: cosine logits / tau, log-sum-exp, diagonal targets.
double contrastive_oracle(const Rows& h, const Rows& hp, double tau) {
  auto cos = [](const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      ab += a[k] * b[k];
      aa += a[k] * a[k];
      bb += b[k] * b[k];
    }
    return ab / std::sqrt(aa * bb);
  };
  double total = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    double denom = 0;
    for (std::size_t j = 0; j < h.size(); ++j) denom += std::exp(cos(h[i], hp[j]) / tau);
    total += std::log(denom) - cos(h[i], hp[i]) / tau;
  }
  return total / static_cast<double>(h.size());
}

Tensor<double> to_tensor(const Rows& rows) {
  Tensor<double> t({rows.size(), rows[0].size()});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[0].size(); ++j) t(i, j) = rows[i][j];
  return t;
}

double graph_contrastive(const Rows& h, const Rows& hp, double tau) {
  Graph<double> g;
  return g.value(simcse_loss(g, ContrastiveBatch{g.constant(to_tensor(h)), g.constant(to_tensor(hp)), tau})).data[0];
}

AbmConfig tiny_config(double dropout) {
  AbmConfig c;
  c.embed_dim = 8;
  c.heads = 2;
  c.layers_asr = c.layers_reply = c.layers_session = 1;
  c.vocab_size = 40;
  c.dropout = dropout;
  return c;
}

}  // namespace

TEST_CASE("contrastive loss reference values") {
  CHECK(simcse_loss_value({{1, 2}}, {{3, -1}}, 0.05) == 0.0);
  CHECK(graph_contrastive({{1, 2}}, {{3, -1}}, 0.05) == 0.0);

  const Rows same(4, std::vector<double>{1, 1, 0});
  CHECK(simcse_loss_value(same, same, 0.05) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(graph_contrastive(same, same, 0.05) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  const Rows eye{{1, 0}, {0, 1}};
  CHECK(simcse_loss_value(eye, eye, 1.0) == doctest::Approx(0.313262).epsilon(1e-6));
  CHECK(graph_contrastive(eye, eye, 1.0) == doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-12));

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t b = 1 + rng.index(6);
    Rows h(b, std::vector<double>(5)), hp(b, std::vector<double>(5));
    for (auto& r : h)
      for (double& v : r) v = rng.normal();
    for (auto& r : hp)
      for (double& v : r) v = rng.normal();
    const double tau = rng.uniform(0.05, 1.0);
    const double expect = contrastive_oracle(h, hp, tau);
    CHECK(simcse_loss_value(h, hp, tau) == doctest::Approx(expect).epsilon(1e-10));
    CHECK(graph_contrastive(h, hp, tau) == doctest::Approx(expect).epsilon(1e-10));
  }
  CHECK_THROWS_AS(simcse_loss_value(eye, eye, 0.0), ContractError);
  CHECK_THROWS_AS(simcse_loss_value({}, {}, 0.05), ContractError);
}

TEST_CASE("contrastive loss gradient") {
  Rng rng(5);
  nn::ParameterStore<double> store;
  auto& a = store.add("a", {4, 6});
  auto& b = store.add("b", {4, 6});
  for (double& v : a.value.data) v = rng.normal();
  for (double& v : b.value.data) v = rng.normal();
  const auto r = nn::grad_check(store, [&](Graph<double>& g) {
    return simcse_loss(g, ContrastiveBatch{g.param(a), g.param(b), 0.05});
  });
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("contrastive views share the query encoder and differ only by dropout") {
  AbmModel<double> model(tiny_config(0.0));
  const std::vector<ContrastiveQuery> queries{{{5, 6, 7}, kSegmentOriginal}, {{8, 9}, kSegmentNbest}};
  {
    Graph<double> g;
    Rng ra(1), rb(2);
    const auto batch = contrastive_views(g, model, queries, 0.05, ra, rb);
    CHECK(g.value(batch.h).data == g.value(batch.h_plus).data);
    CHECK(g.value(batch.h).shape == nn::Shape{2, 8});
    // Without dropout both views equal the plain query encoding.
    Graph<double> p;
    CHECK(p.value(model.encode_query(p, {5, 6, 7}, kSegmentOriginal, RunOptions{})).data[0] == g.value(batch.h)(0, 0));
  }
  AbmModel<double> noisy(tiny_config(0.3));
  Graph<double> g;
  Rng ra(1), rb(2);
  const auto batch = contrastive_views(g, noisy, queries, 0.05, ra, rb);
  CHECK(g.value(batch.h).data != g.value(batch.h_plus).data);
  Rng empty_a(1), empty_b(2);
  CHECK_THROWS_AS(contrastive_views(g, noisy, {}, 0.05, empty_a, empty_b), ContractError);
}

TEST_CASE("contrastive queries are deduplicated in first-seen order") {
  Rng rng(1);
  TrainingExample a = testing::random_example(rng, 3, 40, 6, 4, 16);
  TrainingExample b = a;
  Turn& cur = a.window.back().turn;
  cur.bundle.original = {5, 6};
  cur.bundle.nbest = {{5, 6}, {7}, {7}};
  cur.bundle.final_query = {8};
  b.window.back().turn.bundle = cur.bundle;
  b.window.back().turn.bundle.final_query = {9};
  const std::vector<const TrainingExample*> batch{&a, &b};
  const auto qs = contrastive_queries(std::span<const TrainingExample* const>(batch));
  REQUIRE(qs.size() == 4);
  CHECK(qs[0].tokens == TokenSeq{5, 6});
  CHECK(qs[0].segment == kSegmentOriginal);
  CHECK(qs[1].tokens == TokenSeq{7});
  CHECK(qs[1].segment == kSegmentNbest);
  CHECK(qs[2].tokens == TokenSeq{8});
  CHECK(qs[2].segment == kSegmentFinal);
  CHECK(qs[3].tokens == TokenSeq{9});
}

TEST_CASE("domain-intent loss") {
  Graph<double> g;
  const std::vector<int> t0{0};
  CHECK(g.value(domain_intent_loss(g, g.constant(Tensor<double>({1, 6}, 0.0)), std::span<const int>(t0))).data[0] ==
        doctest::Approx(std::log(6.0)).epsilon(1e-12));
  const Var peaked = g.constant(Tensor<double>({1, 2}, std::vector<double>{10.0, 0.0}));
  CHECK(g.value(domain_intent_loss(g, peaked, std::span<const int>(t0))).data[0] ==
        doctest::Approx(4.54e-5).epsilon(1e-3));
  const Var shifted = g.constant(Tensor<double>({1, 2}, std::vector<double>{110.0, 100.0}));
  CHECK(std::abs(g.value(domain_intent_loss(g, shifted, std::span<const int>(t0))).data[0] -
                 g.value(domain_intent_loss(g, peaked, std::span<const int>(t0))).data[0]) <= 1e-12);
  const std::vector<int> bad{2};
  CHECK_THROWS_AS(domain_intent_loss(g, peaked, std::span<const int>(bad)), ContractError);
  const std::vector<int> neg{-1};
  CHECK_THROWS_AS(domain_intent_loss(g, peaked, std::span<const int>(neg)), ContractError);

  // Batch mean of per-row cross-entropy.
  const Var two = g.constant(Tensor<double>({2, 3}, std::vector<double>{1, 2, 3, 0, 0, 5}));
  const std::vector<int> t{2, 0};
  const double expect = 0.5 * (nn::softmax_cross_entropy_value(std::vector<double>{1, 2, 3}, 2) +
                               nn::softmax_cross_entropy_value(std::vector<double>{0, 0, 5}, 0));
  CHECK(g.value(domain_intent_loss(g, two, std::span<const int>(t))).data[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("total loss combination") {
  const LossWeights defaults;
  CHECK(defaults.contrastive == 1e-2);
  CHECK(defaults.domain_intent == 1e-1);
  CHECK(total_loss_value(1.0, 2.0, 3.0, defaults) == doctest::Approx(1.32).epsilon(1e-12));
  CHECK(total_loss_value(1.0, 2.0, 3.0, LossWeights{0.0, 0.0}) == 1.0);

  Graph<double> g;
  const Var m = g.input(Tensor<double>({1}, 1.0));
  const Var s = g.input(Tensor<double>({1}, 2.0));
  const Var c = g.input(Tensor<double>({1}, 3.0));
  const Var total = total_loss(g, m, s, c, defaults);
  CHECK(g.value(total).data[0] == doctest::Approx(1.32).epsilon(1e-12));
  g.backward(total);
  CHECK(g.grad(m).data[0] == 1.0);
  CHECK(g.grad(s).data[0] == doctest::Approx(1e-2));
  CHECK(g.grad(c).data[0] == doctest::Approx(1e-1));
  CHECK(g.value(total_loss(g, m, Var{}, Var{}, defaults)).data[0] == 1.0);

  // Nondecreasing in each weight for nonnegative auxiliary losses.
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const double lm = rng.uniform(0, 2), ls = rng.uniform(0, 3), lc = rng.uniform(0, 3);
    const double w1 = rng.uniform(0, 1), w2 = rng.uniform(0, 1);
    CHECK(total_loss_value(lm, ls, lc, {w1 + 0.1, w2}) >= total_loss_value(lm, ls, lc, {w1, w2}));
    CHECK(total_loss_value(lm, ls, lc, {w1, w2 + 0.1}) >= total_loss_value(lm, ls, lc, {w1, w2}));
  }
  CHECK_THROWS_AS((LossWeights{-1.0, 0.0}.validate()), ConfigError);
}
