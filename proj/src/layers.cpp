#include "abm/layers.hpp"

#include <cmath>

namespace abm::nn {

template <typename T>
void init_glorot(Parameter<T>& p, Rng& rng) {
  const double fan_in = static_cast<double>(p.value.rows());
  const double fan_out = static_cast<double>(p.value.cols());
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (T& v : p.value.data) v = static_cast<T>(rng.uniform(-limit, limit));
}

template <typename T>
void init_normal(Parameter<T>& p, double stddev, Rng& rng) {
  for (T& v : p.value.data) v = static_cast<T>(stddev * rng.normal());
}

template <typename T>
void init_constant(Parameter<T>& p, double c) {
  for (T& v : p.value.data) v = static_cast<T>(c);
}

template <typename T>
EncoderBlockParams<T> EncoderBlockParams<T>::create(ParameterStore<T>& store, const std::string& prefix,
                                                    std::size_t width, std::size_t ffn_width, Rng& init) {
  auto matrix = [&](const char* name, std::size_t r, std::size_t c) {
    Parameter<T>& p = store.add(prefix + "." + name, Shape{r, c});
    init_glorot(p, init);
  };
  auto vector = [&](const char* name, std::size_t n, double v) {
    Parameter<T>& p = store.add(prefix + "." + name, Shape{n});
    init_constant(p, v);
  };
  vector("ln1.gain", width, 1.0);
  vector("ln1.bias", width, 0.0);
  matrix("attn.wq", width, width);
  vector("attn.bq", width, 0.0);
  matrix("attn.wk", width, width);
  matrix("attn.wv", width, width);
  vector("attn.bv", width, 0.0);
  matrix("attn.wo", width, width);
  vector("attn.bo", width, 0.0);
  vector("ln2.gain", width, 1.0);
  vector("ln2.bias", width, 0.0);
  matrix("ffn.w1", width, ffn_width);
  vector("ffn.b1", ffn_width, 0.0);
  matrix("ffn.w2", ffn_width, width);
  vector("ffn.b2", width, 0.0);
  return bind(store, prefix);
}

template <typename T>
EncoderBlockParams<T> EncoderBlockParams<T>::bind(ParameterStore<T>& store, const std::string& prefix) {
  auto get = [&](const char* name) { return &store.get(prefix + "." + name); };
  return EncoderBlockParams{get("ln1.gain"), get("ln1.bias"), get("attn.wq"), get("attn.bq"),
                            get("attn.wk"),  get("attn.wv"), get("attn.bv"),
                            get("attn.wo"),  get("attn.bo"),  get("ln2.gain"), get("ln2.bias"),
                            get("ffn.w1"),   get("ffn.b1"),   get("ffn.w2"),  get("ffn.b2")};
}

template <typename T>
Var multi_head_attention(Graph<T>& g, Var x, const EncoderBlockParams<T>& p, const BlockOptions& opt) {
  const std::size_t width = g.value(x).cols();
  if (opt.heads == 0 || width % opt.heads != 0)
    throw ShapeError("embedding width " + std::to_string(width) + " not divisible by " +
                     std::to_string(opt.heads) + " heads");
  const std::size_t head_dim = width / opt.heads;
  const Var q = linear(g, x, g.param(*p.wq), g.param(*p.bq));
  // No key bias: it adds a per-row constant to the scores, which softmax ignores.
  const Var k = matmul(g, x, g.param(*p.wk));
  const Var v = linear(g, x, g.param(*p.wv), g.param(*p.bv));
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  static const Mask kNoMask;
  const Mask& mask = opt.key_mask ? *opt.key_mask : kNoMask;
  std::vector<Var> heads;
  heads.reserve(opt.heads);
  for (std::size_t h = 0; h < opt.heads; ++h) {
    const Var qh = slice_cols(g, q, h * head_dim, head_dim);
    const Var kh = slice_cols(g, k, h * head_dim, head_dim);
    const Var vh = slice_cols(g, v, h * head_dim, head_dim);
    Var weights = masked_softmax_rows(g, scale(g, matmul_nt(g, qh, kh), inv_sqrt), mask);
    weights = dropout(g, weights, opt.dropout, opt.rng, opt.training);
    heads.push_back(matmul(g, weights, vh));
  }
  const Var context = heads.size() == 1 ? heads[0] : concat_cols(g, heads);
  return linear(g, context, g.param(*p.wo), g.param(*p.bo));
}

template <typename T>
Var encoder_block(Graph<T>& g, Var x, const EncoderBlockParams<T>& p, const BlockOptions& opt) {
  const Var normed = layer_norm(g, x, g.param(*p.ln1_gain), g.param(*p.ln1_bias));
  const Var attended = add(g, x, multi_head_attention(g, normed, p, opt));
  const Var normed2 = layer_norm(g, attended, g.param(*p.ln2_gain), g.param(*p.ln2_bias));
  const Var hidden = gelu(g, linear(g, normed2, g.param(*p.ffn_w1), g.param(*p.ffn_b1)));
  Var ffn = linear(g, hidden, g.param(*p.ffn_w2), g.param(*p.ffn_b2));
  ffn = dropout(g, ffn, opt.dropout, opt.rng, opt.training);
  return add(g, attended, ffn);
}

#define ABM_INSTANTIATE_LAYERS(T)                                                                  \
  template void init_glorot<T>(Parameter<T>&, Rng&);                                               \
  template void init_normal<T>(Parameter<T>&, double, Rng&);                                       \
  template void init_constant<T>(Parameter<T>&, double);                                           \
  template struct EncoderBlockParams<T>;                                                           \
  template Var multi_head_attention<T>(Graph<T>&, Var, const EncoderBlockParams<T>&, const BlockOptions&); \
  template Var encoder_block<T>(Graph<T>&, Var, const EncoderBlockParams<T>&, const BlockOptions&);

ABM_INSTANTIATE_LAYERS(float)
ABM_INSTANTIATE_LAYERS(double)

}  // namespace abm::nn
