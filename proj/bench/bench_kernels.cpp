// Times the OpenMP kernels against the serial reference implementations on
// the layer shapes of the desk configuration.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

#include "edaan/kernels.hpp"
#include "edaan/reference.hpp"

namespace {

using edaan::Tensor;

Tensor<float> random_tensor(edaan::Shape shape, std::mt19937& rng) {
  Tensor<float> t(std::move(shape));
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  for (auto& v : t.vec()) v = u(rng);
  return t;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double omp_ms, double ref_ms) {
  std::printf("%-34s %10.3f %10.3f %8.2fx\n", name, omp_ms, ref_ms, ref_ms / omp_ms);
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::atoi(argv[1]) : 20;
  std::mt19937 rng(7);
  std::printf("threads: %d, reps: %d\n", omp_get_max_threads(), reps);
  std::printf("%-34s %10s %10s %9s\n", "kernel", "omp ms", "serial ms", "speedup");

  {
    const int m = 128, n = 512, k = 288;
    auto a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng);
    Tensor<float> c({m, n});
    report("gemm 128x512x288",
           time_ms([&] { edaan::kernels::gemm<float>(false, false, m, n, k, 1.f, a.data(), b.data(), 0.f, c.data()); },
                   reps),
           time_ms([&] { edaan::reference::gemm<float>(false, false, m, n, k, 1.f, a.data(), b.data(), 0.f, c.data()); },
                   reps));
  }
  {
    auto x = random_tensor({16, 3, 64, 32}, rng), w = random_tensor({8, 3, 7, 7}, rng), bias = random_tensor({8}, rng);
    report("conv2d fwd 16x3x64x32 k7",
           time_ms([&] { edaan::kernels::conv2d_forward(x, w, &bias, 1, 3); }, reps),
           time_ms([&] { edaan::reference::conv2d_forward(x, w, &bias, 1, 3); }, reps));
    auto y = edaan::kernels::conv2d_forward(x, w, &bias, 1, 3);
    auto dy = random_tensor(y.shape(), rng);
    Tensor<float> dx, dw(w.shape()), db(bias.shape());
    report("conv2d bwd 16x3x64x32 k7",
           time_ms([&] { edaan::kernels::conv2d_backward(x, w, dy, 1, 3, &dx, &dw, &db); }, reps),
           time_ms([&] { edaan::reference::conv2d_backward(x, w, dy, 1, 3, &dx, &dw, &db); }, reps));
  }
  {
    auto x = random_tensor({16, 32, 16, 8}, rng), w = random_tensor({32, 16, 3, 3}, rng);
    report("conv_transpose fwd 16x32x16x8 s2",
           time_ms([&] { edaan::kernels::conv_transpose2d_forward(x, w, static_cast<const Tensor<float>*>(nullptr), 2, 1); }, reps),
           time_ms([&] { edaan::reference::conv_transpose2d_forward(x, w, static_cast<const Tensor<float>*>(nullptr), 2, 1); }, reps));
  }
  {
    auto x = random_tensor({16, 32, 16, 8}, rng), gamma = random_tensor({32}, rng), beta = random_tensor({32}, rng);
    std::vector<float> mean, inv_std;
    report("instance_norm fwd 16x32x16x8",
           time_ms([&] { edaan::kernels::instance_norm_forward(x, gamma, beta, 1e-5f, mean, inv_std); }, reps),
           time_ms([&] { edaan::reference::instance_norm_forward(x, gamma, beta, 1e-5f); }, reps));
  }
  return 0;
}
