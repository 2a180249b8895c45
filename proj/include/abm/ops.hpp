#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "abm/graph.hpp"
#include "abm/rng.hpp"

namespace abm::nn {

// Per-position flags: 1 = real, 0 = padding. Empty means all real.
using Mask = std::vector<std::uint8_t>;

template <typename T> Var gather_rows(Graph<T>& g, Var table, std::span<const int> ids);
template <typename T> Var add(Graph<T>& g, Var a, Var b);
// x [n x m] + bias [m] on every row.
template <typename T> Var add_bias(Graph<T>& g, Var x, Var bias);
template <typename T> Var matmul(Graph<T>& g, Var a, Var b);
// a [n x k] times b^T for b [m x k].
template <typename T> Var matmul_nt(Graph<T>& g, Var a, Var b);
template <typename T> Var scale(Graph<T>& g, Var a, double factor);
template <typename T> Var concat_rows(Graph<T>& g, const std::vector<Var>& parts);
template <typename T> Var concat_cols(Graph<T>& g, const std::vector<Var>& parts);
template <typename T> Var slice_cols(Graph<T>& g, Var a, std::size_t begin, std::size_t count);
template <typename T> Var linear(Graph<T>& g, Var x, Var weight, Var bias);

template <typename T> Var layer_norm(Graph<T>& g, Var x, Var gain, Var bias, double eps = 1e-5);
template <typename T> Var gelu(Graph<T>& g, Var x);
template <typename T> Var sigmoid(Graph<T>& g, Var x);

/// Row-wise softmax over the columns whose key flag is set; masked columns get 0.
template <typename T> Var masked_softmax_rows(Graph<T>& g, Var x, const Mask& key_mask);

/// Inverted dropout. Identity (same Var) when not training or rate == 0.
template <typename T> Var dropout(Graph<T>& g, Var x, double rate, Rng* rng, bool training);

/// Column-wise max over unmasked rows; gradient goes to the first argmax.
template <typename T> Var reduce_max_rows(Graph<T>& g, Var x, const Mask& row_mask = {});

template <typename T> Var l2_normalize_rows(Graph<T>& g, Var x);
template <typename T> Var sum(Graph<T>& g, Var x);
template <typename T> Var mean(Graph<T>& g, const std::vector<Var>& scalars);

inline constexpr double kProbabilityClamp = 1e-7;

// -[l ln p + (1-l) ln(1-p)], p clamped to [1e-7, 1-1e-7].
template <typename T> Var binary_cross_entropy(Graph<T>& g, Var p, int label);
/// Mean over rows of -ln softmax(logits[i])[targets[i]].
template <typename T>
Var softmax_cross_entropy_rows(Graph<T>& g, Var logits, std::span<const int> targets);

// Plain evaluations of the same formulas.
double cosine_similarity(std::span<const double> a, std::span<const double> b);
double binary_cross_entropy_value(double p, int label);
double softmax_cross_entropy_value(std::span<const double> logits, int target);

}  // namespace abm::nn
