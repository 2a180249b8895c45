#include "abm/adam.hpp"

#include <cmath>

namespace abm::nn {

template <typename T>
Adam<T>::Adam(ParameterStore<T>& params, AdamOptions options) : params_(params), options_(options) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m_.emplace_back(params_[i].value.shape);
    v_.emplace_back(params_[i].value.shape);
  }
}

template <typename T>
void Adam<T>::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].grad.all_finite())
      throw NonFiniteError("non-finite gradient in " + params_[i].name + " at step " +
                           std::to_string(step_ + 1));
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const T b1 = static_cast<T>(options_.beta1);
  const T b2 = static_cast<T>(options_.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(options_.beta1, t));
  const T c2 = static_cast<T>(1.0 - std::pow(options_.beta2, t));
  const T lr = static_cast<T>(options_.lr);
  const T eps = static_cast<T>(options_.eps);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter<T>& p = params_[i];
    T* m = m_[i].data.data();
    T* v = v_[i].data.data();
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const T gr = p.grad.data[j];
      m[j] = b1 * m[j] + (T(1) - b1) * gr;
      v[j] = b2 * v[j] + (T(1) - b2) * gr * gr;
      const T mhat = m[j] / c1;
      const T vhat = v[j] / c2;
      p.value.data[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
  params_.zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace abm::nn
