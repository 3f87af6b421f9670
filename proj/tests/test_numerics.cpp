#include <doctest.h>

#include <cmath>

#include "conceptseg/graph.hpp"

using namespace conceptseg;

TEST_CASE("matmul identity and hand oracle") {
  Graph g;
  NodeRef i2 = g.constant(Tensor::from_rows(2, 2, {1, 0, 0, 1}));
  NodeRef prod = g.matmul(i2, i2);
  CHECK(g.value(prod).data == std::vector<double>{1, 0, 0, 1});

  // [[1,2],[3,4]] x [[1],[1]] = [[3],[7]], multiplied out by hand
  NodeRef a = g.constant(Tensor::from_rows(2, 2, {1, 2, 3, 4}));
  NodeRef b = g.constant(Tensor::from_rows(2, 1, {1, 1}));
  NodeRef c = g.matmul(a, b);
  CHECK(g.value(c).data == std::vector<double>{3, 7});
}

TEST_CASE("matmul shape contract names both shapes") {
  Graph g;
  NodeRef a = g.constant(Tensor(2, 3));
  NodeRef b = g.constant(Tensor(2, 3));
  CHECK_THROWS_WITH_AS(g.matmul(a, b), doctest::Contains("2x3"), ContractError);
}

TEST_CASE("matmul gradients against hand derivation") {
  Graph g;
  Tensor at = Tensor::from_rows(2, 2, {1, 2, 3, 4});
  at.requires_grad = true;
  Tensor bt = Tensor::from_rows(2, 1, {5, 6});
  bt.requires_grad = true;
  NodeRef a = g.leaf(at);
  NodeRef b = g.leaf(bt);
  NodeRef loss = g.sum(g.matmul(a, b));
  g.backward(loss);
  // dL/da = 1 * b^T per row; dL/db = column sums of a
  CHECK(g.grad(a).data == std::vector<double>{5, 6, 5, 6});
  CHECK(g.grad(b).data == std::vector<double>{4, 6});
}

TEST_CASE("softmax rows: symmetry, closed form, overflow stability") {
  Graph g;
  NodeRef sym = g.softmax_rows(g.constant(Tensor::from_rows(1, 2, {0, 0})));
  CHECK(g.value(sym).data[0] == doctest::Approx(0.5).epsilon(1e-12));

  // [ln 2, 0] -> [2/3, 1/3]
  NodeRef r = g.softmax_rows(g.constant(Tensor::from_rows(1, 2, {std::log(2.0), 0})));
  CHECK(g.value(r).data[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(g.value(r).data[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  NodeRef big = g.softmax_rows(g.constant(Tensor::from_rows(1, 2, {1000, 0})));
  CHECK(g.value(big).data[0] == doctest::Approx(1.0));
  CHECK(g.value(big).all_finite());
}

TEST_CASE("softmax rows sum to one and shift invariance") {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor x = Tensor::random_uniform(3, 5, 4.0, rng);
    Graph g;
    NodeRef s = g.softmax_rows(g.constant(x));
    for (std::size_t i = 0; i < 3; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < 5; ++j) total += g.value(s).at(i, j);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
    // adding a per-row constant leaves the result unchanged
    Tensor shifted = x;
    const double c = rng.uniform(-7.0, 7.0);
    for (double& v : shifted.data) v += c;
    Graph h;
    NodeRef s2 = h.softmax_rows(h.constant(shifted));
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(g.value(s).data[i] == doctest::Approx(h.value(s2).data[i]).epsilon(1e-12));
  }
}

TEST_CASE("backward: linear case, fan-out accumulation, detached parameter") {
  Graph g;
  Tensor xt(1, 3, 0.0);
  xt.data = {1, 2, 3};
  xt.requires_grad = true;
  NodeRef x = g.leaf(xt);
  NodeRef loss = g.sum(x);
  g.backward(loss);
  CHECK(g.grad(x).data == std::vector<double>{1, 1, 1});

  // loss = sum(x .* x), x = [1, 2] -> grad = [2, 4], analytic derivative
  Graph h;
  Tensor yt = Tensor::from_rows(1, 2, {1, 2});
  yt.requires_grad = true;
  NodeRef y = h.leaf(yt);
  h.backward(h.sum(h.mul(y, y)));
  CHECK(h.grad(y).data == std::vector<double>{2, 4});

  // a parameter the loss never touches gets a zero gradient
  Graph k;
  NodeRef used = k.leaf(Tensor::from_rows(1, 2, {1, 1}));
  Tensor dt = Tensor::from_rows(1, 2, {5, 5});
  dt.requires_grad = true;
  NodeRef detached = k.leaf(dt);
  k.backward(k.sum(used));
  CHECK(k.grad(detached).data == std::vector<double>{0, 0});
}

TEST_CASE("backward rejects non-scalar loss") {
  Graph g;
  NodeRef x = g.leaf(Tensor(2, 2, 1.0));
  CHECK_THROWS_AS(g.backward(x), ContractError);
}

TEST_CASE("grad_check eps contract and non-finite detection") {
  Tensor x(1, 2, 0.5);
  auto build = [](Graph& g, NodeRef n) { return g.sum(n); };
  CHECK_THROWS_AS(grad_check(build, x, 1e-8), ContractError);
  CHECK_THROWS_AS(grad_check(build, x, 1e-2), ContractError);

  auto log_loss = [](Graph& g, NodeRef n) { return g.sum(g.log(n)); };
  Tensor bad(1, 1, -1.0);
  CHECK_THROWS_AS(grad_check(log_loss, bad, 1e-5), NumericalError);
}

TEST_CASE("grad_check: exact for linear, small for every differentiable op") {
  Tensor x(1, 4, 0.3);
  auto lin = [](Graph& g, NodeRef n) { return g.sum(n); };
  CHECK(grad_check(lin, x, 1e-5) <= 1e-10);

  Rng rng(17);
  using Build = std::function<NodeRef(Graph&, NodeRef)>;
  const std::vector<std::pair<const char*, Build>> ops = {
      {"sigmoid", [](Graph& g, NodeRef n) { return g.sum(g.sigmoid(n)); }},
      {"log_sigmoid", [](Graph& g, NodeRef n) { return g.sum(g.log_sigmoid(n)); }},
      {"tanh", [](Graph& g, NodeRef n) { return g.sum(g.tanh(n)); }},
      {"exp", [](Graph& g, NodeRef n) { return g.sum(g.exp(n)); }},
      {"softmax", [](Graph& g, NodeRef n) { return g.sum(g.mul(g.softmax_rows(n), n)); }},
      {"log_softmax",
       [](Graph& g, NodeRef n) { return g.sum(g.mul(g.log_softmax_rows(n), n)); }},
      {"mean_rows", [](Graph& g, NodeRef n) {
         return g.sum(g.mul(g.mean_rows(n), g.mean_rows(n)));
       }},
      {"matmul_tanh",
       [](Graph& g, NodeRef n) { return g.sum(g.tanh(g.matmul(n, g.transpose(n)))); }},
      {"div", [](Graph& g, NodeRef n) {
         return g.sum(g.div(n, g.add_const(g.mul(n, n), 1.0)));
       }},
      {"gather_select", [](Graph& g, NodeRef n) {
         NodeRef rows = g.gather_rows(n, {2, 0, 2});
         return g.add(g.select(g.mul(rows, rows), 1, 1), g.max_all(n));
       }},
      {"concat_bias", [](Graph& g, NodeRef n) {
         NodeRef cat = g.concat_rows(n, g.mul(n, n));
         return g.mean(g.add_row_bias(cat, g.mean_rows(n)));
       }},
  };
  for (const auto& [name, build] : ops) {
    CAPTURE(name);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      Tensor pt = Tensor::random_uniform(3, 4, 1.5, rng);
      worst = std::max(worst, grad_check(build, pt, 1e-5));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("forward results are bitwise deterministic") {
  Rng rng(5);
  Tensor a = Tensor::random_uniform(17, 9, 2.0, rng);
  Tensor b = Tensor::random_uniform(9, 13, 2.0, rng);
  const Tensor c1 = matmul_parallel(a, b);
  const Tensor c2 = matmul_parallel(a, b);
  CHECK(c1.data == c2.data);
  CHECK(c1.data == matmul_serial(a, b).data);
}

TEST_CASE("rng streams are stable and categorical draws match frequencies") {
  Rng a(42, {1, 2});
  Rng b(42, {1, 2});
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(42, {1, 3});
  bool differs = false;
  Rng a2(42, {1, 2});
  for (int i = 0; i < 10; ++i) differs |= a2.next_u64() != c.next_u64();
  CHECK(differs);

  Rng rng(123);
  const std::vector<double> probs = {0.1, 0.2, 0.3, 0.4};
  std::vector<int> counts(4, 0);
  const int n = 40000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(rng.categorical(probs))];
  for (int j = 0; j < 4; ++j) {
    const double p = probs[static_cast<std::size_t>(j)];
    const double sigma = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(counts[static_cast<std::size_t>(j)] / static_cast<double>(n) - p) <
          4 * sigma);
  }
}
