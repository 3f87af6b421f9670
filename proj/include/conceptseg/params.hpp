#ifndef CONCEPTSEG_PARAMS_HPP
#define CONCEPTSEG_PARAMS_HPP

#include <string>
#include <utility>
#include <vector>

#include "conceptseg/graph.hpp"
#include "conceptseg/tensor.hpp"

namespace conceptseg {

// Flat named-tensor container. Insertion order is fixed, which keeps
// checkpoints and gradient updates byte-reproducible.
struct ParamStore {
  std::vector<std::pair<std::string, Tensor>> items;

  Tensor& add(const std::string& name, Tensor t) {
    if (has(name)) throw ContractError("ParamStore: duplicate parameter " + name);
    items.emplace_back(name, std::move(t));
    return items.back().second;
  }

  bool has(const std::string& name) const {
    for (const auto& [n, t] : items)
      if (n == name) return true;
    return false;
  }

  Tensor& at(const std::string& name) {
    for (auto& [n, t] : items)
      if (n == name) return t;
    throw ContractError("ParamStore: unknown parameter " + name);
  }

  const Tensor& at(const std::string& name) const {
    for (const auto& [n, t] : items)
      if (n == name) return t;
    throw ContractError("ParamStore: unknown parameter " + name);
  }
};

// Leafs every parameter into the graph; lookup by name.
struct BoundParams {
  std::vector<std::pair<std::string, NodeRef>> nodes;

  NodeRef at(const std::string& name) const {
    for (const auto& [n, r] : nodes)
      if (n == name) return r;
    throw ContractError("BoundParams: unknown parameter " + name);
  }
};

inline BoundParams bind_params(Graph& g, const ParamStore& store) {
  BoundParams b;
  b.nodes.reserve(store.items.size());
  for (const auto& [name, t] : store.items) b.nodes.emplace_back(name, g.leaf(t));
  return b;
}

// Plain gradient descent on every parameter whose name starts with one of the
// prefixes. Update order follows store insertion order.
inline void sgd_update(ParamStore& store, const Graph& g, const BoundParams& bound,
                       const std::vector<std::string>& prefixes, double step_size) {
  for (std::size_t i = 0; i < store.items.size(); ++i) {
    const std::string& name = store.items[i].first;
    bool trainable = false;
    for (const std::string& p : prefixes)
      if (name.rfind(p, 0) == 0) trainable = true;
    if (!trainable) continue;
    const Tensor& grad = g.grad(bound.nodes[i].second);
    Tensor& param = store.items[i].second;
    for (std::size_t k = 0; k < param.size(); ++k) param.data[k] -= step_size * grad.data[k];
  }
}

}  // namespace conceptseg

#endif
