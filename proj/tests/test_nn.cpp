#include <cmath>
#include <numeric>

#include "abm/adam.hpp"
#include "abm/gradcheck.hpp"
#include "abm/layers.hpp"
#include "doctest.h"

using namespace abm;
using namespace abm::nn;

namespace {

template <typename T>
Parameter<T>& random_param(ParameterStore<T>& store, const std::string& name, Shape shape, Rng& rng,
                           double scale = 1.0) {
  Parameter<T>& p = store.add(name, std::move(shape));
  for (T& v : p.value.data) v = static_cast<T>(scale * rng.normal());
  return p;
}

Tensor<double> tensor(Shape s, std::vector<double> v) { return Tensor<double>(std::move(s), std::move(v)); }

}  // namespace

TEST_CASE("embedding lookup rows and scatter gradient") {
  ParameterStore<double> store;
  Parameter<double>& table = store.add("table", {4, 2});
  table.value = tensor({4, 2}, {0, 1, 2, 3, 4, 5, 6, 7});
  Graph<double> g;
  const std::vector<int> twice{0, 0};
  const Var rows = gather_rows(g, g.param(table), std::span<const int>(twice));
  CHECK(g.value(rows).data == std::vector<double>{0, 1, 0, 1});
  const std::vector<int> three{3};
  CHECK(g.value(gather_rows(g, g.param(table), std::span<const int>(three))).data == std::vector<double>{6, 7});
  const std::vector<int> bad{4};
  CHECK_THROWS_AS(gather_rows(g, g.param(table), std::span<const int>(bad)), ContractError);

  // d sum(E[ids]) / d table = per-row occurrence count.
  const std::vector<int> ids{1, 3, 1, 1};
  Graph<double> g2;
  g2.backward(sum(g2, gather_rows(g2, g2.param(table), std::span<const int>(ids))));
  CHECK(table.grad.data == std::vector<double>{0, 0, 3, 3, 0, 0, 1, 1});
  store.zero_grad();
  const auto r = grad_check(store, [&](Graph<double>& gg) {
    return sum(gg, gather_rows(gg, gg.param(table), std::span<const int>(ids)));
  });
  CHECK(r.max_rel_error < 1e-8);
}

TEST_CASE("attention over a single position returns the value projection") {
  Rng rng(4);
  ParameterStore<double> store;
  const auto p = EncoderBlockParams<double>::create(store, "b", 8, 32, rng);
  for (std::size_t i = 0; i < store.size(); ++i)
    for (double& v : store[i].value.data) v += 0.1 * rng.normal();
  const Tensor<double> x = tensor({1, 8}, {0.3, -1.2, 0.5, 0.9, -0.4, 0.0, 1.5, -0.7});
  Graph<double> g;
  BlockOptions opt;
  opt.heads = 2;
  const Tensor<double>& out = g.value(multi_head_attention(g, g.constant(x), p, opt));
  // Oracle: (x Wv + bv) Wo + bo.
  std::vector<double> v(8), expect(8);
  for (std::size_t j = 0; j < 8; ++j) {
    v[j] = p.bv->value[j];
    for (std::size_t i = 0; i < 8; ++i) v[j] += x[i] * p.wv->value(i, j);
  }
  for (std::size_t j = 0; j < 8; ++j) {
    expect[j] = p.bo->value[j];
    for (std::size_t i = 0; i < 8; ++i) expect[j] += v[i] * p.wo->value(i, j);
  }
  for (std::size_t j = 0; j < 8; ++j) CHECK(out[j] == doctest::Approx(expect[j]).epsilon(1e-12));

  opt.heads = 3;
  CHECK_THROWS_AS(multi_head_attention(g, g.constant(x), p, opt), ShapeError);
}

TEST_CASE("encoder block: inference deterministic, gradients match finite differences") {
  Rng rng(8);
  ParameterStore<double> store;
  const auto p = EncoderBlockParams<double>::create(store, "b", 8, 32, rng);
  for (std::size_t i = 0; i < store.size(); ++i)
    for (double& v : store[i].value.data) v += 0.1 * rng.normal();
  Parameter<double>& x = random_param(store, "x", {4, 8}, rng);
  BlockOptions opt;
  opt.heads = 2;
  {
    Graph<double> a, b;
    CHECK(a.value(encoder_block(a, a.param(x), p, opt)).data == b.value(encoder_block(b, b.param(x), p, opt)).data);
  }
  // Weighted sum so every output coordinate matters.
  Tensor<double> w({4, 8});
  for (double& v : w.data) v = rng.normal();
  const auto loss = [&](Graph<double>& g) {
    const Var y = encoder_block(g, g.param(x), p, opt);
    return sum(g, matmul_nt(g, scale(g, y, 1.0), g.constant(w)));
  };
  GradCheckOptions o;
  o.max_coordinates = 400;
  const auto plain = grad_check(store, loss, o);
  CHECK_MESSAGE(plain.max_rel_error < 1e-6, plain.worst_parameter, " ", plain.worst_index, " ", plain.worst_analytic, " ", plain.worst_numeric);

  // With dropout, a fixed rng seed per evaluation keeps the function smooth.
  BlockOptions drop = opt;
  drop.training = true;
  drop.dropout = 0.2;
  const auto dropped = [&](Graph<double>& g) {
    Rng masks(77);
    BlockOptions d = drop;
    d.rng = &masks;
    return sum(g, matmul_nt(g, encoder_block(g, g.param(x), p, d), g.constant(w)));
  };
  CHECK(grad_check(store, dropped, o).max_rel_error < 1e-6);
}

TEST_CASE("key masking hides padded positions") {
  Rng rng(12);
  ParameterStore<double> store;
  const auto p = EncoderBlockParams<double>::create(store, "b", 8, 32, rng);
  Tensor<double> x({3, 8});
  for (double& v : x.data) v = rng.normal();
  BlockOptions opt;
  opt.heads = 2;
  const Mask mask{1, 1, 0};
  opt.key_mask = &mask;
  Graph<double> a;
  const Tensor<double> ya = a.value(encoder_block(a, a.constant(x), p, opt));
  for (std::size_t j = 0; j < 8; ++j) x(2, j) = rng.normal();
  Graph<double> b;
  const Tensor<double> yb = b.value(encoder_block(b, b.constant(x), p, opt));
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t j = 0; j < 8; ++j) CHECK(ya(r, j) == yb(r, j));
}

TEST_CASE("reduce-max pooling") {
  Graph<double> g;
  const Var x = g.input(tensor({2, 2}, {1, 5, 3, 2}));
  const Var m = reduce_max_rows(g, x);
  CHECK(g.value(m).data == std::vector<double>{3, 5});
  CHECK(g.value(m).shape == Shape{2});
  g.backward(sum(g, m));
  CHECK(g.grad(x).data == std::vector<double>{0, 1, 1, 0});

  Graph<double> single;
  CHECK(single.value(reduce_max_rows(single, single.constant(tensor({1, 3}, {4, -1, 2})))).data ==
        std::vector<double>{4, -1, 2});

  Graph<double> ties;
  const Var t = ties.input(tensor({3, 1}, {2, 2, 2}));
  ties.backward(sum(ties, reduce_max_rows(ties, t)));
  CHECK(ties.grad(t).data == std::vector<double>{1, 0, 0});

  Graph<double> masked;
  const Mask rows{0, 1};
  CHECK(masked.value(reduce_max_rows(masked, masked.constant(tensor({2, 2}, {9, 9, 1, 2})), rows)).data ==
        std::vector<double>{1, 2});
  const Mask none{0, 0};
  CHECK_THROWS_AS(reduce_max_rows(masked, masked.constant(tensor({2, 2}, {9, 9, 1, 2})), none), ContractError);

  // Finite differences agree away from ties.
  Rng rng(3);
  ParameterStore<double> store;
  Parameter<double>& p = random_param(store, "p", {5, 4}, rng);
  CHECK(grad_check(store, [&](Graph<double>& gg) { return sum(gg, reduce_max_rows(gg, gg.param(p))); })
            .max_rel_error < 1e-8);
}

TEST_CASE("dropout") {
  Rng rng(21);
  Graph<double> g;
  Tensor<double> x({1000, 1000}, 1.0);
  const Var in = g.constant(x);
  CHECK(dropout(g, in, 0.0, &rng, true).id == in.id);
  CHECK(dropout(g, in, 0.7, &rng, false).id == in.id);
  CHECK_THROWS_AS(dropout(g, in, 1.0, &rng, true), ContractError);
  CHECK_THROWS_AS(dropout(g, in, -0.1, &rng, true), ContractError);

  const Tensor<double>& y = g.value(dropout(g, in, 0.5, &rng, true));
  std::size_t zeros = 0;
  double survivor_sum = 0.0;
  for (double v : y.data) {
    if (v == 0.0) ++zeros;
    else survivor_sum += v;
  }
  const double n = static_cast<double>(y.size());
  CHECK(std::abs(zeros / n - 0.5) <= 0.002);
  CHECK(survivor_sum / (n - zeros) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("cosine similarity") {
  CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{1, 0}) == doctest::Approx(1.0));
  CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
  CHECK(cosine_similarity(std::vector<double>{1, 1}, std::vector<double>{1, 0}) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 0}), ContractError);
}

TEST_CASE("binary cross-entropy") {
  CHECK(binary_cross_entropy_value(0.5, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(binary_cross_entropy_value(0.5, 1) == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(binary_cross_entropy_value(0.9, 1) == doctest::Approx(0.105361).epsilon(1e-5));
  CHECK(binary_cross_entropy_value(1.0, 1) == doctest::Approx(-std::log(1.0 - 1e-7)).epsilon(1e-12));
  CHECK(binary_cross_entropy_value(0.0, 1) == doctest::Approx(-std::log(1e-7)).epsilon(1e-12));
  Graph<double> g;
  const Var p = g.input(tensor({1, 1}, {0.9}));
  const Var l = binary_cross_entropy(g, p, 1);
  CHECK(g.value(l).data[0] == doctest::Approx(-std::log(0.9)).epsilon(1e-15));
  g.backward(l);
  CHECK(g.grad(p).data[0] == doctest::Approx(-1.0 / 0.9).epsilon(1e-12));
}

TEST_CASE("softmax cross-entropy") {
  const std::vector<double> uniform{0.3, 0.3, 0.3, 0.3};
  CHECK(softmax_cross_entropy_value(uniform, 2) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  const std::vector<double> peaked{10, -10};
  CHECK(softmax_cross_entropy_value(peaked, 0) == doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-6));
  CHECK(softmax_cross_entropy_value(peaked, 0) == doctest::Approx(2.06e-9).epsilon(0.01));
  const std::vector<double> a{0.1, -2.0, 3.3}, b{7.1, 5.0, 10.3};
  CHECK(std::abs(softmax_cross_entropy_value(a, 1) - softmax_cross_entropy_value(b, 1)) <= 1e-12);
  CHECK_THROWS_AS(softmax_cross_entropy_value(a, 3), ContractError);

  Graph<double> g;
  const std::vector<int> targets{1};
  const Var logits = g.constant(tensor({1, 3}, {0.1, -2.0, 3.3}));
  CHECK(g.value(softmax_cross_entropy_rows(g, logits, std::span<const int>(targets))).data[0] ==
        doctest::Approx(softmax_cross_entropy_value(a, 1)).epsilon(1e-15));
}

TEST_CASE("softmax rows, layer norm moments, finiteness") {
  Rng rng(6);
  Tensor<double> x({7, 9});
  for (double& v : x.data) v = 5.0 * rng.normal();
  Graph<double> g;
  const Tensor<double>& s = g.value(masked_softmax_rows(g, g.constant(x), Mask{}));
  for (std::size_t r = 0; r < 7; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 9; ++c) total += s(r, c);
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }
  const Tensor<double>& n =
      g.value(layer_norm(g, g.constant(x), g.constant(Tensor<double>({9}, 1.0)), g.constant(Tensor<double>({9}, 0.0))));
  for (std::size_t r = 0; r < 7; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < 9; ++c) mean += n(r, c) / 9.0;
    for (std::size_t c = 0; c < 9; ++c) var += (n(r, c) - mean) * (n(r, c) - mean) / 9.0;
    CHECK(std::abs(mean) <= 1e-6);
    CHECK(std::abs(var - 1.0) <= 1e-5);
  }

  for (int trial = 0; trial < 50; ++trial) {
    Tensor<double> big({4, 6});
    for (double& v : big.data) v = 40.0 * rng.normal();
    Graph<double> h;
    const Var in = h.constant(big);
    CHECK(h.value(masked_softmax_rows(h, in, Mask{})).all_finite());
    CHECK(h.value(sigmoid(h, in)).all_finite());
    CHECK(h.value(gelu(h, in)).all_finite());
    CHECK(h.value(l2_normalize_rows(h, in)).all_finite());
    const std::vector<int> t{0, 1, 2, 3};
    CHECK(h.value(softmax_cross_entropy_rows(h, in, std::span<const int>(t))).all_finite());
  }
}

TEST_CASE("every op's gradient matches central differences") {
  Rng rng(31);
  ParameterStore<double> store;
  Parameter<double>& a = random_param(store, "a", {3, 4}, rng);
  Parameter<double>& b = random_param(store, "b", {4, 5}, rng);
  Parameter<double>& c = random_param(store, "c", {3, 4}, rng);
  Parameter<double>& bias = random_param(store, "bias", {5}, rng);
  Parameter<double>& gain = random_param(store, "gain", {4}, rng);
  Parameter<double>& shift = random_param(store, "shift", {4}, rng);
  const std::vector<int> targets{0, 4, 2};
  const Mask keys{1, 0, 1};
  const auto loss = [&](Graph<double>& g) {
    const Var x = g.param(a);
    const Var ln = layer_norm(g, add(g, x, g.param(c)), g.param(gain), g.param(shift));
    const Var h = gelu(g, linear(g, ln, g.param(b), g.param(bias)));                      // [3 x 5]
    const Var att = masked_softmax_rows(g, scale(g, matmul_nt(g, h, h), 0.3), keys);      // [3 x 3]
    const Var mixed = matmul(g, att, h);                                                  // [3 x 5]
    const Var both = concat_cols(g, {mixed, slice_cols(g, h, 1, 3)});                     // [3 x 8]
    const Var stacked = concat_rows(g, {both, sigmoid(g, both)});                         // [6 x 8]
    const Var pooled = reduce_max_rows(g, stacked);                                       // [8]
    const Var normed = l2_normalize_rows(g, x);
    const Var ce = softmax_cross_entropy_rows(g, slice_cols(g, mixed, 0, 5), std::span<const int>(targets));
    const Var p = sigmoid(g, scale(g, sum(g, pooled), 0.1));
    return mean(g, {ce, binary_cross_entropy(g, p, 1), sum(g, normed), sum(g, add_bias(g, h, g.param(bias)))});
  };
  GradCheckOptions o;
  o.max_coordinates = 1000;
  const auto r = grad_check(store, loss, o);
  CHECK(r.checked == store.coordinate_count());
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("grad_check: dense layer + BCE passes, a doubled gradient is caught") {
  Rng rng(2);
  ParameterStore<double> store;
  Parameter<double>& w = random_param(store, "w", {6, 1}, rng);
  Parameter<double>& b = random_param(store, "b", {1}, rng);
  Tensor<double> x({1, 6});
  for (double& v : x.data) v = rng.normal();
  const auto dense = [&](Graph<double>& g) {
    return binary_cross_entropy(g, sigmoid(g, linear(g, g.constant(x), g.param(w), g.param(b))), 1);
  };
  CHECK(grad_check(store, dense).max_rel_error < 1e-6);

  const auto faulty = [&](Graph<double>& g) {
    const Var z = linear(g, g.constant(x), g.param(w), g.param(b));
    // Identity whose backward pass doubles the gradient.
    const Var doubled = g.emplace(g.value(z), {z}, [z](Graph<double>& gg, Var self) {
      Tensor<double>& dz = gg.grad(z);
      const Tensor<double>& up = gg.grad(self);
      for (std::size_t i = 0; i < up.size(); ++i) dz.data[i] += 2.0 * up.data[i];
    });
    return binary_cross_entropy(g, sigmoid(g, doubled), 1);
  };
  CHECK(grad_check(store, faulty).max_rel_error > 0.3);
}

TEST_CASE("adam") {
  ParameterStore<double> store;
  Parameter<double>& p = store.add("p", {3});
  p.value = tensor({3}, {1.0, -2.0, 0.5});
  Adam<double> zero(store, AdamOptions{});
  zero.step();
  CHECK(p.value.data == std::vector<double>{1.0, -2.0, 0.5});

  ParameterStore<double> s2;
  Parameter<double>& q = s2.add("q", {1});
  q.value.data[0] = 1.0;
  AdamOptions o;
  Adam<double> adam(s2, o);
  const double grad = 0.37;
  q.grad.data[0] = grad;
  adam.step();
  // t=1: m_hat = g, v_hat = g^2, so the step is lr g / (|g| + eps).
  CHECK(q.value.data[0] == doctest::Approx(1.0 - o.lr * grad / (std::abs(grad) + o.eps)).epsilon(1e-15));
  CHECK(q.grad.data[0] == 0.0);
  CHECK(adam.steps() == 1);

  q.grad.data[0] = std::nan("");
  const double before = q.value.data[0];
  CHECK_THROWS_AS(adam.step(), NonFiniteError);
  CHECK(q.value.data[0] == before);
  CHECK(adam.steps() == 1);

  auto run = [](std::uint64_t seed) {
    ParameterStore<double> s;
    Parameter<double>& v = s.add("v", {4});
    Rng rng(seed);
    Adam<double> opt(s, AdamOptions{});
    for (int i = 0; i < 20; ++i) {
      for (double& gv : v.grad.data) gv = rng.normal();
      opt.step();
    }
    return v.value.data;
  };
  CHECK(run(5) == run(5));
}

TEST_CASE("parameter store names are unique and the checksum tracks values") {
  ParameterStore<float> store;
  store.add("a", {2});
  CHECK_THROWS_AS(store.add("a", {3}), ContractError);
  const auto before = store.checksum();
  store.get("a").value.data[0] = 1.0f;
  CHECK(store.checksum() != before);
}
