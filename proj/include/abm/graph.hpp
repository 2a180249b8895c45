#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "abm/tensor.hpp"

namespace abm::nn {

/// Handle to a node on a Graph tape.
struct Var {
  static constexpr std::uint32_t kInvalid = std::numeric_limits<std::uint32_t>::max();
  std::uint32_t id = kInvalid;
  bool valid() const { return id != kInvalid; }
};

/// Reverse-mode tape. Nodes are appended in evaluation order; backward walks
/// them in reverse. Parameter nodes read and accumulate directly into the
/// owning Parameter, so gradients from several graphs add up until zeroed.
template <typename T>
class Graph {
 public:
  using Backward = std::function<void(Graph&, Var self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor<T> value);
  // Leaf that collects a gradient (inputs under test).
  Var input(Tensor<T> value);
  Var param(Parameter<T>& p);

  /// Appends an op result. `backward` runs only if some parent needs a
  /// gradient and this node received one.
  Var emplace(Tensor<T> value, std::initializer_list<Var> parents, Backward backward);
  Var emplace(Tensor<T> value, const std::vector<Var>& parents, Backward backward);

  const Tensor<T>& value(Var v) const;
  // Gradient buffer, zero-initialized on first access.
  Tensor<T>& grad(Var v);
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must hold one element.
  void backward(Var loss);

  std::size_t node_count() const { return nodes_.size(); }
  // Names of every parameter bound to this graph, in first-use order.
  std::vector<std::string> parameter_names() const;

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    Parameter<T>* param = nullptr;
    Backward backward;
    bool requires_grad = false;
  };
  Node& node(Var v);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, Var> param_nodes_;
};

}  // namespace abm::nn
