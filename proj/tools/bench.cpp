// Serial-vs-parallel throughput comparison for the hot kernels.

#include <chrono>
#include <cstdio>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "conceptseg/config.hpp"
#include "conceptseg/eval.hpp"
#include "conceptseg/metrics.hpp"

namespace cs = conceptseg;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

}  // namespace

int main() {
  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

  {
    cs::Rng rng(7);
    cs::Tensor a = cs::Tensor::random_uniform(192, 192, 1.0, rng);
    cs::Tensor b = cs::Tensor::random_uniform(192, 192, 1.0, rng);
    row("matmul 192x192x192",
        time_ms([&] { cs::matmul_serial(a, b); }, 20),
        time_ms([&] { cs::matmul_parallel(a, b); }, 20));
  }

  {
    cs::Rng rng(11);
    cs::MaskGrid gt(128, 128), pred(128, 128);
    for (int y = 40; y < 90; ++y)
      for (int x = 30; x < 80; ++x) gt.at(x, y) = 1.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
      pred.values[i] = std::min(1.0, std::max(0.0, gt.values[i] + rng.uniform(-0.3, 0.3)));
    row("sample_metrics 128x128",
        time_ms([&] { cs::sample_metrics_serial(pred, gt, 0.5); }, 5),
        time_ms([&] { cs::sample_metrics(pred, gt, 0.5); }, 5));
  }

  {
    const cs::BoxN box{0.2, 0.3, 0.7, 0.8};
    row("rasterize_soft_box 512^2",
        time_ms([&] { cs::rasterize_soft_box_serial(box, 512, 512, 1e-3); }, 10),
        time_ms([&] { cs::rasterize_soft_box(box, 512, 512, 1e-3); }, 10));
  }

  {
    cs::RunConfig cfg;
    cfg.episodes = 16;
    std::vector<cs::PreparedEpisode> eps =
        cs::prepare_all(cs::generate_dataset(cfg, 0, cfg.episodes));
    cs::ParamStore params = cs::init_params(cs::train_config(cfg).model, cfg.seed);
    const cs::TrainConfig tcfg = cs::train_config(cfg);
    const double parallel_ms =
        time_ms([&] { cs::evaluate(params, eps, cs::RouterMode::Adaptive, tcfg); }, 3);
#ifdef _OPENMP
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const double serial_ms =
        time_ms([&] { cs::evaluate(params, eps, cs::RouterMode::Adaptive, tcfg); }, 3);
    omp_set_num_threads(saved);
#else
    const double serial_ms = parallel_ms;
#endif
    row("evaluate 16 episodes", serial_ms, parallel_ms);
  }

  return 0;
}
