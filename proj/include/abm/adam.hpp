#pragma once

#include <cstdint>
#include <vector>

#include "abm/tensor.hpp"

namespace abm::nn {

struct AdamOptions {
  double lr = 1.2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over every parameter of a store.
template <typename T>
class Adam {
 public:
  Adam(ParameterStore<T>& params, AdamOptions options);

  /// Applies one update from the accumulated gradients, then zeroes them.
  /// Throws NonFiniteError (naming the parameter) without touching anything
  /// if some gradient is not finite.
  void step();

  std::uint64_t steps() const { return step_; }
  void set_lr(double lr) { options_.lr = lr; }
  const AdamOptions& options() const { return options_; }
  const Tensor<T>& first_moment(std::size_t i) const { return m_[i]; }
  const Tensor<T>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  ParameterStore<T>& params_;
  AdamOptions options_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::uint64_t step_ = 0;
};

}  // namespace abm::nn
