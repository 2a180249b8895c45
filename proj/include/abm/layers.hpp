#pragma once

#include <string>

#include "abm/ops.hpp"

namespace abm::nn {

template <typename T>
void init_glorot(Parameter<T>& p, Rng& rng);
template <typename T>
void init_normal(Parameter<T>& p, double stddev, Rng& rng);
template <typename T>
void init_constant(Parameter<T>& p, double v);

/// Parameters of one pre-norm transformer encoder block, registered under
/// `<prefix>.ln1.gain`, `<prefix>.attn.wq`, ... `<prefix>.ffn.w2`.
template <typename T>
struct EncoderBlockParams {
  Parameter<T>* ln1_gain;
  Parameter<T>* ln1_bias;
  Parameter<T>* wq;
  Parameter<T>* bq;
  Parameter<T>* wk;
  Parameter<T>* wv;
  Parameter<T>* bv;
  Parameter<T>* wo;
  Parameter<T>* bo;
  Parameter<T>* ln2_gain;
  Parameter<T>* ln2_bias;
  Parameter<T>* ffn_w1;
  Parameter<T>* ffn_b1;
  Parameter<T>* ffn_w2;
  Parameter<T>* ffn_b2;

  static EncoderBlockParams create(ParameterStore<T>& store, const std::string& prefix,
                                   std::size_t width, std::size_t ffn_width, Rng& init);
  // Rebinds to parameters already present in `store`.
  static EncoderBlockParams bind(ParameterStore<T>& store, const std::string& prefix);
};

struct BlockOptions {
  std::size_t heads = 4;
  double dropout = 0.0;
  bool training = false;
  Rng* rng = nullptr;
  const Mask* key_mask = nullptr;  // positions that may be attended to
};

/// Scaled dot-product self-attention over already-normalized rows; dropout
/// acts on the attention weights.
template <typename T>
Var multi_head_attention(Graph<T>& g, Var x, const EncoderBlockParams<T>& p, const BlockOptions& opt);

/// x + MHA(LN1(x)), then + dropout(FFN(LN2(.))) with a GELU E -> 4E -> E FFN.
template <typename T>
Var encoder_block(Graph<T>& g, Var x, const EncoderBlockParams<T>& p, const BlockOptions& opt);

}  // namespace abm::nn
