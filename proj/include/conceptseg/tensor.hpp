#ifndef CONCEPTSEG_TENSOR_HPP
#define CONCEPTSEG_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "conceptseg/errors.hpp"
#include "conceptseg/rng.hpp"

namespace conceptseg {

// Dense row-major 2-D tensor of doubles. Scalars are 1x1. Reductions are
// fixed left-to-right in row-major order so results are bitwise reproducible.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  bool requires_grad = false;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }

  static Tensor from_rows(std::size_t r, std::size_t c, std::vector<double> values);

  // Uniform init in [-range, range]; deterministic given rng state.
  static Tensor random_uniform(std::size_t r, std::size_t c, double range, Rng& rng);

  std::size_t size() const { return data.size(); }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const;
  bool all_finite() const;
};

// Serial reference kernel, kept for tests and the benchmark.
Tensor matmul_serial(const Tensor& a, const Tensor& b);
// OpenMP-parallel kernel. Each output element runs its own serial k-loop, so
// the result is bitwise identical to matmul_serial for any thread count.
Tensor matmul_parallel(const Tensor& a, const Tensor& b);

}  // namespace conceptseg

#endif
