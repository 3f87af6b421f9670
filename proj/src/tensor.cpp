#include "conceptseg/tensor.hpp"

#include <cmath>
#include <utility>

namespace conceptseg {

Tensor Tensor::from_rows(std::size_t r, std::size_t c, std::vector<double> values) {
  if (values.size() != r * c)
    throw ContractError("Tensor::from_rows: " + std::to_string(values.size()) +
                        " values for shape " + std::to_string(r) + "x" + std::to_string(c));
  Tensor t;
  t.rows = r;
  t.cols = c;
  t.data = std::move(values);
  return t;
}

Tensor Tensor::random_uniform(std::size_t r, std::size_t c, double range, Rng& rng) {
  Tensor t(r, c);
  for (double& v : t.data) v = rng.uniform(-range, range);
  return t;
}

std::string Tensor::shape_str() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

void check_matmul_shapes(const Tensor& a, const Tensor& b) {
  if (a.cols != b.rows)
    throw ContractError("matmul: inner dimensions disagree, " + a.shape_str() + " x " +
                        b.shape_str());
}

inline double row_dot(const double* a, const double* b, std::size_t k, std::size_t bcols) {
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) acc += a[i] * b[i * bcols];
  return acc;
}

}  // namespace

Tensor matmul_serial(const Tensor& a, const Tensor& b) {
  check_matmul_shapes(a, b);
  Tensor out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j)
      out.at(i, j) = row_dot(&a.data[i * a.cols], &b.data[j], a.cols, b.cols);
  return out;
}

Tensor matmul_parallel(const Tensor& a, const Tensor& b) {
  check_matmul_shapes(a, b);
  Tensor out(a.rows, b.cols);
  const std::int64_t m = static_cast<std::int64_t>(a.rows);
  const std::int64_t n = static_cast<std::int64_t>(b.cols);
  const std::int64_t work = m * n * static_cast<std::int64_t>(a.cols);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (work >= 1 << 16)
#endif
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j)
      out.data[i * n + j] = row_dot(&a.data[i * a.cols], &b.data[j], a.cols, b.cols);
  (void)work;
  return out;
}

}  // namespace conceptseg
