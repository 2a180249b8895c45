#include "abm/graph.hpp"

namespace abm::nn {

template <typename T>
typename Graph<T>::Node& Graph<T>::node(Var v) {
  if (v.id >= nodes_.size()) throw ContractError("invalid graph variable");
  return nodes_[v.id];
}

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(Var v) const {
  if (v.id >= nodes_.size()) throw ContractError("invalid graph variable");
  return nodes_[v.id];
}

template <typename T>
Var Graph<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Var Graph<T>::input(Tensor<T> value) {
  Var v = constant(std::move(value));
  nodes_[v.id].requires_grad = true;
  return v;
}

template <typename T>
Var Graph<T>::param(Parameter<T>& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return it->second;
  Node n;
  n.param = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  Var v{static_cast<std::uint32_t>(nodes_.size() - 1)};
  param_nodes_.emplace(&p, v);
  return v;
}

template <typename T>
Var Graph<T>::emplace(Tensor<T> value, std::initializer_list<Var> parents, Backward backward) {
  return emplace(std::move(value), std::vector<Var>(parents), std::move(backward));
}

template <typename T>
Var Graph<T>::emplace(Tensor<T> value, const std::vector<Var>& parents, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (Var p : parents) n.requires_grad = n.requires_grad || node(p).requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
const Tensor<T>& Graph<T>::value(Var v) const {
  const Node& n = node(v);
  return n.param ? n.param->value : n.value;
}

template <typename T>
Tensor<T>& Graph<T>::grad(Var v) {
  Node& n = node(v);
  if (n.param) return n.param->grad;
  if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape);
  return n.grad;
}

template <typename T>
void Graph<T>::backward(Var loss) {
  if (value(loss).size() != 1) throw ShapeError("backward needs a scalar loss");
  grad(loss).data[0] += T(1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, Var{static_cast<std::uint32_t>(i)});
  }
}

template <typename T>
std::vector<std::string> Graph<T>::parameter_names() const {
  std::vector<std::string> names;
  for (const Node& n : nodes_)
    if (n.param) names.push_back(n.param->name);
  return names;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace abm::nn
