#include "abm/tensor.hpp"

#include "abm/rng.hpp"

namespace abm::nn {

std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out + "]";
}

template <typename T>
Parameter<T>& ParameterStore<T>::add(const std::string& name, Shape shape) {
  if (index_.count(name)) throw ContractError("duplicate parameter name " + name);
  auto p = std::make_unique<Parameter<T>>();
  p->name = name;
  p->value = Tensor<T>(shape);
  p->grad = Tensor<T>(std::move(shape));
  index_.emplace(name, params_.size());
  params_.push_back(std::move(p));
  return *params_.back();
}

template <typename T>
Parameter<T>* ParameterStore<T>::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

template <typename T>
const Parameter<T>* ParameterStore<T>::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

template <typename T>
Parameter<T>& ParameterStore<T>::get(const std::string& name) {
  if (auto* p = find(name)) return *p;
  throw ContractError("unknown parameter " + name);
}

template <typename T>
const Parameter<T>& ParameterStore<T>::get(const std::string& name) const {
  if (const auto* p = find(name)) return *p;
  throw ContractError("unknown parameter " + name);
}

template <typename T>
std::size_t ParameterStore<T>::coordinate_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) std::fill(p->grad.data.begin(), p->grad.data.end(), T(0));
}

template <typename T>
std::uint64_t ParameterStore<T>::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params_) {
    h = fnv1a64(p->name.data(), p->name.size(), h);
    h = fnv1a64(p->value.data.data(), p->value.data.size() * sizeof(T), h);
  }
  return h;
}

template class ParameterStore<float>;
template class ParameterStore<double>;

}  // namespace abm::nn
