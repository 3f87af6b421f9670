#ifndef CONCEPTSEG_GRAPH_HPP
#define CONCEPTSEG_GRAPH_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "conceptseg/tensor.hpp"

namespace conceptseg {

struct NodeRef {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are appended in topological order; backward walks
// the tape once in reverse, accumulating gradients additively across fan-out.
// Single-threaded per graph; distinct graphs are independent.
class Graph {
 public:
  NodeRef leaf(Tensor t);
  NodeRef constant(Tensor t);  // leaf with requires_grad = false

  NodeRef matmul(NodeRef a, NodeRef b);
  NodeRef transpose(NodeRef a);
  NodeRef add(NodeRef a, NodeRef b);
  NodeRef sub(NodeRef a, NodeRef b);
  NodeRef mul(NodeRef a, NodeRef b);          // elementwise
  NodeRef div(NodeRef a, NodeRef b);          // elementwise
  NodeRef scale(NodeRef a, double c);
  NodeRef add_const(NodeRef a, double c);
  NodeRef add_row_bias(NodeRef a, NodeRef bias);  // bias is 1xN, added to every row
  NodeRef softmax_rows(NodeRef a);
  NodeRef log_softmax_rows(NodeRef a);
  NodeRef sigmoid(NodeRef a);
  NodeRef log_sigmoid(NodeRef a);
  NodeRef tanh(NodeRef a);
  NodeRef exp(NodeRef a);
  NodeRef log(NodeRef a);
  NodeRef clamp(NodeRef a, double lo, double hi);
  NodeRef sum(NodeRef a);        // -> 1x1
  NodeRef mean(NodeRef a);       // -> 1x1
  NodeRef mean_rows(NodeRef a);  // MxN -> 1xN
  NodeRef concat_rows(NodeRef a, NodeRef b);
  NodeRef gather_rows(NodeRef a, std::vector<int> row_ids);
  NodeRef select(NodeRef a, std::size_t r, std::size_t c);  // -> 1x1
  NodeRef max_all(NodeRef a);                               // -> 1x1, first argmax

  const Tensor& value(NodeRef n) const;
  // Zero tensor of the node's shape when the node is not reachable from the
  // loss (or before backward ran).
  const Tensor& grad(NodeRef n) const;

  // Scalar-loss reverse pass; visits each node exactly once.
  void backward(NodeRef loss);

  // Multiplies performed by matmul nodes so far (m*k*n per product).
  std::uint64_t matmul_multiplies() const { return matmul_multiplies_; }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    Leaf, MatMul, Transpose, Add, Sub, Mul, Div, Scale, AddConst, AddRowBias,
    SoftmaxRows, LogSoftmaxRows, Sigmoid, LogSigmoid, Tanh, Exp, Log, Clamp,
    Sum, Mean, MeanRows, ConcatRows, GatherRows, Select, MaxAll,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    Tensor value;
    double c0 = 0.0, c1 = 0.0;  // scalar parameters (scale factor, clamp bounds, ...)
    std::vector<int> idx;       // gather rows / select position / argmax
  };

  NodeRef push(Node n);
  const Tensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  void accumulate(int id, const Tensor& g);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<char> touched_;
  std::uint64_t matmul_multiplies_ = 0;
  mutable Tensor zero_cache_;
};

// Max over coordinates of |analytic - central difference| / max(1, |central|).
// `build` assembles the scalar loss from a leaf holding x.
double grad_check(const std::function<NodeRef(Graph&, NodeRef)>& build, const Tensor& x,
                  double eps);

}  // namespace conceptseg

#endif
