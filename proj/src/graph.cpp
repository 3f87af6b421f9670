#include "conceptseg/graph.hpp"

#include <algorithm>
#include <cmath>

namespace conceptseg {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ContractError(std::string(op) + ": shape mismatch, " + a.shape_str() + " vs " +
                        b.shape_str());
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow on either tail.
double stable_log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

}  // namespace

NodeRef Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return NodeRef{static_cast<int>(nodes_.size()) - 1};
}

NodeRef Graph::leaf(Tensor t) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(t);
  return push(std::move(n));
}

NodeRef Graph::constant(Tensor t) {
  t.requires_grad = false;
  return leaf(std::move(t));
}

NodeRef Graph::matmul(NodeRef a, NodeRef b) {
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  matmul_multiplies_ += static_cast<std::uint64_t>(ta.rows) * ta.cols * tb.cols;
  Node n;
  n.op = Op::MatMul;
  n.a = a.id;
  n.b = b.id;
  n.value = matmul_parallel(ta, tb);
  return push(std::move(n));
}

NodeRef Graph::transpose(NodeRef a) {
  const Tensor& t = val(a.id);
  Node n;
  n.op = Op::Transpose;
  n.a = a.id;
  n.value = Tensor(t.cols, t.rows);
  for (std::size_t i = 0; i < t.rows; ++i)
    for (std::size_t j = 0; j < t.cols; ++j) n.value.at(j, i) = t.at(i, j);
  return push(std::move(n));
}

NodeRef Graph::add(NodeRef a, NodeRef b) {
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  require_same_shape(ta, tb, "add");
  Node n;
  n.op = Op::Add;
  n.a = a.id;
  n.b = b.id;
  n.value = ta;
  for (std::size_t i = 0; i < tb.size(); ++i) n.value.data[i] += tb.data[i];
  return push(std::move(n));
}

NodeRef Graph::sub(NodeRef a, NodeRef b) {
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  require_same_shape(ta, tb, "sub");
  Node n;
  n.op = Op::Sub;
  n.a = a.id;
  n.b = b.id;
  n.value = ta;
  for (std::size_t i = 0; i < tb.size(); ++i) n.value.data[i] -= tb.data[i];
  return push(std::move(n));
}

NodeRef Graph::mul(NodeRef a, NodeRef b) {
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  require_same_shape(ta, tb, "mul");
  Node n;
  n.op = Op::Mul;
  n.a = a.id;
  n.b = b.id;
  n.value = ta;
  for (std::size_t i = 0; i < tb.size(); ++i) n.value.data[i] *= tb.data[i];
  return push(std::move(n));
}

NodeRef Graph::div(NodeRef a, NodeRef b) {
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  require_same_shape(ta, tb, "div");
  Node n;
  n.op = Op::Div;
  n.a = a.id;
  n.b = b.id;
  n.value = ta;
  for (std::size_t i = 0; i < tb.size(); ++i) n.value.data[i] /= tb.data[i];
  return push(std::move(n));
}

NodeRef Graph::scale(NodeRef a, double c) {
  Node n;
  n.op = Op::Scale;
  n.a = a.id;
  n.c0 = c;
  n.value = val(a.id);
  for (double& v : n.value.data) v *= c;
  return push(std::move(n));
}

NodeRef Graph::add_const(NodeRef a, double c) {
  Node n;
  n.op = Op::AddConst;
  n.a = a.id;
  n.c0 = c;
  n.value = val(a.id);
  for (double& v : n.value.data) v += c;
  return push(std::move(n));
}

NodeRef Graph::add_row_bias(NodeRef a, NodeRef bias) {
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(bias.id);
  if (tb.rows != 1 || tb.cols != ta.cols)
    throw ContractError("add_row_bias: bias " + tb.shape_str() + " does not match " +
                        ta.shape_str());
  Node n;
  n.op = Op::AddRowBias;
  n.a = a.id;
  n.b = bias.id;
  n.value = ta;
  for (std::size_t i = 0; i < ta.rows; ++i)
    for (std::size_t j = 0; j < ta.cols; ++j) n.value.at(i, j) += tb.data[j];
  return push(std::move(n));
}

NodeRef Graph::softmax_rows(NodeRef a) {
  const Tensor& t = val(a.id);
  Node n;
  n.op = Op::SoftmaxRows;
  n.a = a.id;
  n.value = Tensor(t.rows, t.cols);
  for (std::size_t i = 0; i < t.rows; ++i) {
    double mx = t.at(i, 0);
    for (std::size_t j = 1; j < t.cols; ++j) mx = std::max(mx, t.at(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < t.cols; ++j) {
      const double e = std::exp(t.at(i, j) - mx);
      n.value.at(i, j) = e;
      denom += e;
    }
    for (std::size_t j = 0; j < t.cols; ++j) n.value.at(i, j) /= denom;
  }
  return push(std::move(n));
}

NodeRef Graph::log_softmax_rows(NodeRef a) {
  const Tensor& t = val(a.id);
  Node n;
  n.op = Op::LogSoftmaxRows;
  n.a = a.id;
  n.value = Tensor(t.rows, t.cols);
  for (std::size_t i = 0; i < t.rows; ++i) {
    double mx = t.at(i, 0);
    for (std::size_t j = 1; j < t.cols; ++j) mx = std::max(mx, t.at(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < t.cols; ++j) denom += std::exp(t.at(i, j) - mx);
    const double lse = mx + std::log(denom);
    for (std::size_t j = 0; j < t.cols; ++j) n.value.at(i, j) = t.at(i, j) - lse;
  }
  return push(std::move(n));
}

NodeRef Graph::sigmoid(NodeRef a) {
  Node n;
  n.op = Op::Sigmoid;
  n.a = a.id;
  n.value = val(a.id);
  for (double& v : n.value.data) v = stable_sigmoid(v);
  return push(std::move(n));
}

NodeRef Graph::log_sigmoid(NodeRef a) {
  Node n;
  n.op = Op::LogSigmoid;
  n.a = a.id;
  n.value = val(a.id);
  for (double& v : n.value.data) v = stable_log_sigmoid(v);
  return push(std::move(n));
}

NodeRef Graph::tanh(NodeRef a) {
  Node n;
  n.op = Op::Tanh;
  n.a = a.id;
  n.value = val(a.id);
  for (double& v : n.value.data) v = std::tanh(v);
  return push(std::move(n));
}

NodeRef Graph::exp(NodeRef a) {
  Node n;
  n.op = Op::Exp;
  n.a = a.id;
  n.value = val(a.id);
  for (double& v : n.value.data) v = std::exp(v);
  return push(std::move(n));
}

NodeRef Graph::log(NodeRef a) {
  Node n;
  n.op = Op::Log;
  n.a = a.id;
  n.value = val(a.id);
  for (double& v : n.value.data) v = std::log(v);
  return push(std::move(n));
}

NodeRef Graph::clamp(NodeRef a, double lo, double hi) {
  Node n;
  n.op = Op::Clamp;
  n.a = a.id;
  n.c0 = lo;
  n.c1 = hi;
  n.value = val(a.id);
  for (double& v : n.value.data) v = std::min(std::max(v, lo), hi);
  return push(std::move(n));
}

NodeRef Graph::sum(NodeRef a) {
  const Tensor& t = val(a.id);
  double acc = 0.0;
  for (double v : t.data) acc += v;
  Node n;
  n.op = Op::Sum;
  n.a = a.id;
  n.value = Tensor::scalar(acc);
  return push(std::move(n));
}

NodeRef Graph::mean(NodeRef a) {
  const Tensor& t = val(a.id);
  double acc = 0.0;
  for (double v : t.data) acc += v;
  Node n;
  n.op = Op::Mean;
  n.a = a.id;
  n.value = Tensor::scalar(acc / static_cast<double>(t.size()));
  return push(std::move(n));
}

NodeRef Graph::mean_rows(NodeRef a) {
  const Tensor& t = val(a.id);
  Node n;
  n.op = Op::MeanRows;
  n.a = a.id;
  n.value = Tensor(1, t.cols);
  for (std::size_t i = 0; i < t.rows; ++i)
    for (std::size_t j = 0; j < t.cols; ++j) n.value.data[j] += t.at(i, j);
  for (double& v : n.value.data) v /= static_cast<double>(t.rows);
  return push(std::move(n));
}

NodeRef Graph::concat_rows(NodeRef a, NodeRef b) {
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  if (ta.cols != tb.cols)
    throw ContractError("concat_rows: column mismatch, " + ta.shape_str() + " vs " +
                        tb.shape_str());
  Node n;
  n.op = Op::ConcatRows;
  n.a = a.id;
  n.b = b.id;
  n.value = Tensor(ta.rows + tb.rows, ta.cols);
  std::copy(ta.data.begin(), ta.data.end(), n.value.data.begin());
  std::copy(tb.data.begin(), tb.data.end(), n.value.data.begin() + static_cast<long>(ta.size()));
  return push(std::move(n));
}

NodeRef Graph::gather_rows(NodeRef a, std::vector<int> row_ids) {
  const Tensor& t = val(a.id);
  for (int r : row_ids)
    if (r < 0 || static_cast<std::size_t>(r) >= t.rows)
      throw ContractError("gather_rows: row " + std::to_string(r) + " out of range for " +
                          t.shape_str());
  Node n;
  n.op = Op::GatherRows;
  n.a = a.id;
  n.idx = std::move(row_ids);
  n.value = Tensor(n.idx.size(), t.cols);
  for (std::size_t i = 0; i < n.idx.size(); ++i)
    for (std::size_t j = 0; j < t.cols; ++j)
      n.value.at(i, j) = t.at(static_cast<std::size_t>(n.idx[i]), j);
  return push(std::move(n));
}

NodeRef Graph::select(NodeRef a, std::size_t r, std::size_t c) {
  const Tensor& t = val(a.id);
  if (r >= t.rows || c >= t.cols)
    throw ContractError("select: (" + std::to_string(r) + "," + std::to_string(c) +
                        ") out of range for " + t.shape_str());
  Node n;
  n.op = Op::Select;
  n.a = a.id;
  n.idx = {static_cast<int>(r), static_cast<int>(c)};
  n.value = Tensor::scalar(t.at(r, c));
  return push(std::move(n));
}

NodeRef Graph::max_all(NodeRef a) {
  const Tensor& t = val(a.id);
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.size(); ++i)
    if (t.data[i] > t.data[best]) best = i;
  Node n;
  n.op = Op::MaxAll;
  n.a = a.id;
  n.idx = {static_cast<int>(best)};
  n.value = Tensor::scalar(t.data[best]);
  return push(std::move(n));
}

const Tensor& Graph::value(NodeRef n) const { return val(n.id); }

const Tensor& Graph::grad(NodeRef n) const {
  const std::size_t id = static_cast<std::size_t>(n.id);
  if (id < grads_.size() && touched_[id]) return grads_[id];
  const Tensor& v = val(n.id);
  zero_cache_ = Tensor(v.rows, v.cols);
  return zero_cache_;
}

void Graph::accumulate(int id, const Tensor& g) {
  const std::size_t i = static_cast<std::size_t>(id);
  if (!touched_[i]) {
    grads_[i] = g;
    touched_[i] = 1;
    return;
  }
  for (std::size_t k = 0; k < g.size(); ++k) grads_[i].data[k] += g.data[k];
}

void Graph::backward(NodeRef loss) {
  const Tensor& lv = val(loss.id);
  if (lv.rows != 1 || lv.cols != 1)
    throw ContractError("backward: loss must be scalar, got " + lv.shape_str());

  grads_.assign(nodes_.size(), Tensor());
  touched_.assign(nodes_.size(), 0);
  grads_[static_cast<std::size_t>(loss.id)] = Tensor::scalar(1.0);
  touched_[static_cast<std::size_t>(loss.id)] = 1;

  for (int id = loss.id; id >= 0; --id) {
    if (!touched_[static_cast<std::size_t>(id)]) continue;
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = grads_[static_cast<std::size_t>(id)];
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::MatMul: {
        const Tensor& a = val(n.a);
        const Tensor& b = val(n.b);
        // dA = G * B^T
        Tensor da(a.rows, a.cols);
        for (std::size_t i = 0; i < a.rows; ++i)
          for (std::size_t k = 0; k < a.cols; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < b.cols; ++j) acc += g.at(i, j) * b.at(k, j);
            da.at(i, k) = acc;
          }
        accumulate(n.a, da);
        // dB = A^T * G
        Tensor db(b.rows, b.cols);
        for (std::size_t k = 0; k < b.rows; ++k)
          for (std::size_t j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < a.rows; ++i) acc += a.at(i, k) * g.at(i, j);
            db.at(k, j) = acc;
          }
        accumulate(n.b, db);
        break;
      }
      case Op::Transpose: {
        const Tensor& a = val(n.a);
        Tensor da(a.rows, a.cols);
        for (std::size_t i = 0; i < a.rows; ++i)
          for (std::size_t j = 0; j < a.cols; ++j) da.at(i, j) = g.at(j, i);
        accumulate(n.a, da);
        break;
      }
      case Op::Add:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::Sub: {
        accumulate(n.a, g);
        Tensor db = g;
        for (double& v : db.data) v = -v;
        accumulate(n.b, db);
        break;
      }
      case Op::Mul: {
        const Tensor& a = val(n.a);
        const Tensor& b = val(n.b);
        Tensor da = g;
        for (std::size_t k = 0; k < da.size(); ++k) da.data[k] *= b.data[k];
        accumulate(n.a, da);
        Tensor db = g;
        for (std::size_t k = 0; k < db.size(); ++k) db.data[k] *= a.data[k];
        accumulate(n.b, db);
        break;
      }
      case Op::Div: {
        const Tensor& a = val(n.a);
        const Tensor& b = val(n.b);
        Tensor da = g;
        for (std::size_t k = 0; k < da.size(); ++k) da.data[k] /= b.data[k];
        accumulate(n.a, da);
        Tensor db = g;
        for (std::size_t k = 0; k < db.size(); ++k)
          db.data[k] *= -a.data[k] / (b.data[k] * b.data[k]);
        accumulate(n.b, db);
        break;
      }
      case Op::Scale: {
        Tensor da = g;
        for (double& v : da.data) v *= n.c0;
        accumulate(n.a, da);
        break;
      }
      case Op::AddConst:
        accumulate(n.a, g);
        break;
      case Op::AddRowBias: {
        accumulate(n.a, g);
        Tensor db(1, g.cols);
        for (std::size_t i = 0; i < g.rows; ++i)
          for (std::size_t j = 0; j < g.cols; ++j) db.data[j] += g.at(i, j);
        accumulate(n.b, db);
        break;
      }
      case Op::SoftmaxRows: {
        const Tensor& s = n.value;
        Tensor da(s.rows, s.cols);
        for (std::size_t i = 0; i < s.rows; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < s.cols; ++j) dot += g.at(i, j) * s.at(i, j);
          for (std::size_t j = 0; j < s.cols; ++j)
            da.at(i, j) = s.at(i, j) * (g.at(i, j) - dot);
        }
        accumulate(n.a, da);
        break;
      }
      case Op::LogSoftmaxRows: {
        const Tensor& ls = n.value;
        Tensor da(ls.rows, ls.cols);
        for (std::size_t i = 0; i < ls.rows; ++i) {
          double gsum = 0.0;
          for (std::size_t j = 0; j < ls.cols; ++j) gsum += g.at(i, j);
          for (std::size_t j = 0; j < ls.cols; ++j)
            da.at(i, j) = g.at(i, j) - std::exp(ls.at(i, j)) * gsum;
        }
        accumulate(n.a, da);
        break;
      }
      case Op::Sigmoid: {
        const Tensor& s = n.value;
        Tensor da = g;
        for (std::size_t k = 0; k < da.size(); ++k)
          da.data[k] *= s.data[k] * (1.0 - s.data[k]);
        accumulate(n.a, da);
        break;
      }
      case Op::LogSigmoid: {
        const Tensor& x = val(n.a);
        Tensor da = g;
        for (std::size_t k = 0; k < da.size(); ++k)
          da.data[k] *= 1.0 - stable_sigmoid(x.data[k]);
        accumulate(n.a, da);
        break;
      }
      case Op::Tanh: {
        const Tensor& t = n.value;
        Tensor da = g;
        for (std::size_t k = 0; k < da.size(); ++k)
          da.data[k] *= 1.0 - t.data[k] * t.data[k];
        accumulate(n.a, da);
        break;
      }
      case Op::Exp: {
        const Tensor& e = n.value;
        Tensor da = g;
        for (std::size_t k = 0; k < da.size(); ++k) da.data[k] *= e.data[k];
        accumulate(n.a, da);
        break;
      }
      case Op::Log: {
        const Tensor& x = val(n.a);
        Tensor da = g;
        for (std::size_t k = 0; k < da.size(); ++k) da.data[k] /= x.data[k];
        accumulate(n.a, da);
        break;
      }
      case Op::Clamp: {
        const Tensor& x = val(n.a);
        Tensor da = g;
        for (std::size_t k = 0; k < da.size(); ++k)
          if (x.data[k] <= n.c0 || x.data[k] >= n.c1) da.data[k] = 0.0;
        accumulate(n.a, da);
        break;
      }
      case Op::Sum: {
        const Tensor& a = val(n.a);
        Tensor da(a.rows, a.cols, g.data[0]);
        accumulate(n.a, da);
        break;
      }
      case Op::Mean: {
        const Tensor& a = val(n.a);
        Tensor da(a.rows, a.cols, g.data[0] / static_cast<double>(a.size()));
        accumulate(n.a, da);
        break;
      }
      case Op::MeanRows: {
        const Tensor& a = val(n.a);
        Tensor da(a.rows, a.cols);
        for (std::size_t i = 0; i < a.rows; ++i)
          for (std::size_t j = 0; j < a.cols; ++j)
            da.at(i, j) = g.data[j] / static_cast<double>(a.rows);
        accumulate(n.a, da);
        break;
      }
      case Op::ConcatRows: {
        const Tensor& a = val(n.a);
        const Tensor& b = val(n.b);
        Tensor da(a.rows, a.cols);
        std::copy(g.data.begin(), g.data.begin() + static_cast<long>(a.size()), da.data.begin());
        accumulate(n.a, da);
        Tensor db(b.rows, b.cols);
        std::copy(g.data.begin() + static_cast<long>(a.size()), g.data.end(), db.data.begin());
        accumulate(n.b, db);
        break;
      }
      case Op::GatherRows: {
        const Tensor& a = val(n.a);
        Tensor da(a.rows, a.cols);
        for (std::size_t i = 0; i < n.idx.size(); ++i)
          for (std::size_t j = 0; j < a.cols; ++j)
            da.at(static_cast<std::size_t>(n.idx[i]), j) += g.at(i, j);
        accumulate(n.a, da);
        break;
      }
      case Op::Select: {
        const Tensor& a = val(n.a);
        Tensor da(a.rows, a.cols);
        da.at(static_cast<std::size_t>(n.idx[0]), static_cast<std::size_t>(n.idx[1])) =
            g.data[0];
        accumulate(n.a, da);
        break;
      }
      case Op::MaxAll: {
        const Tensor& a = val(n.a);
        Tensor da(a.rows, a.cols);
        da.data[static_cast<std::size_t>(n.idx[0])] = g.data[0];
        accumulate(n.a, da);
        break;
      }
    }
  }
}

double grad_check(const std::function<NodeRef(Graph&, NodeRef)>& build, const Tensor& x,
                  double eps) {
  if (eps < 1e-7 || eps > 1e-3)
    throw ContractError("grad_check: eps must lie in [1e-7, 1e-3]");

  Graph g;
  Tensor xt = x;
  xt.requires_grad = true;
  NodeRef xn = g.leaf(xt);
  NodeRef loss = build(g, xn);
  if (!std::isfinite(g.value(loss).data[0]))
    throw NumericalError("grad_check: non-finite loss at base point");
  g.backward(loss);
  const Tensor analytic = g.grad(xn);

  auto eval = [&](const Tensor& point) {
    Graph h;
    NodeRef n = h.leaf(point);
    NodeRef l = build(h, n);
    const double v = h.value(l).data[0];
    if (!std::isfinite(v)) throw NumericalError("grad_check: non-finite loss at probe point");
    return v;
  };

  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor hi = x, lo = x;
    hi.data[i] += eps;
    lo.data[i] -= eps;
    const double central = (eval(hi) - eval(lo)) / (2.0 * eps);
    const double err = std::abs(analytic.data[i] - central) / std::max(1.0, std::abs(central));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace conceptseg
