#include <omp.h>

#include <random>

#include "doctest.h"
#include "edaan/kernels.hpp"
#include "edaan/reference.hpp"

using edaan::Tensor;

namespace {

template <typename Dtype>
Tensor<Dtype> random_tensor(edaan::Shape shape, std::mt19937_64& rng) {
  Tensor<Dtype> t(std::move(shape));
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& v : t.vec()) v = static_cast<Dtype>(u(rng));
  return t;
}

template <typename Dtype>
double max_abs_diff(const Tensor<Dtype>& a, const Tensor<Dtype>& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0;
  for (std::size_t i = 0; i < a.count(); ++i) m = std::max(m, std::fabs(double(a[i]) - double(b[i])));
  return m;
}

}  // namespace

TEST_CASE_TEMPLATE("gemm matches the reference for every transpose combination", Dtype, float, double) {
  std::mt19937_64 rng(1);
  const double tol = sizeof(Dtype) == 4 ? 1e-4 : 1e-12;
  for (int ta = 0; ta < 2; ++ta)
    for (int tb = 0; tb < 2; ++tb) {
      const int m = 13, n = 17, k = 29;
      auto a = random_tensor<Dtype>({ta ? k : m, ta ? m : k}, rng);
      auto b = random_tensor<Dtype>({tb ? n : k, tb ? k : n}, rng);
      auto c1 = random_tensor<Dtype>({m, n}, rng);
      auto c2 = c1;
      edaan::kernels::gemm<Dtype>(ta, tb, m, n, k, Dtype(0.7), a.data(), b.data(), Dtype(0.3), c1.data());
      edaan::reference::gemm<Dtype>(ta, tb, m, n, k, Dtype(0.7), a.data(), b.data(), Dtype(0.3), c2.data());
      CHECK(max_abs_diff(c1, c2) < tol);
    }
}

TEST_CASE_TEMPLATE("conv2d forward and backward match the reference", Dtype, float, double) {
  std::mt19937_64 rng(2);
  const double tol = sizeof(Dtype) == 4 ? 1e-4 : 1e-11;
  struct Case { int k, stride, pad; };
  for (Case c : {Case{3, 1, 1}, Case{3, 2, 1}, Case{7, 1, 3}, Case{4, 2, 1}, Case{1, 1, 0}}) {
    auto x = random_tensor<Dtype>({2, 3, 9, 7}, rng);
    auto w = random_tensor<Dtype>({4, 3, c.k, c.k}, rng);
    auto bias = random_tensor<Dtype>({4}, rng);
    auto y1 = edaan::kernels::conv2d_forward(x, w, &bias, c.stride, c.pad);
    auto y2 = edaan::reference::conv2d_forward(x, w, &bias, c.stride, c.pad);
    CHECK(max_abs_diff(y1, y2) < tol);
    auto dy = random_tensor<Dtype>(y1.shape(), rng);
    Tensor<Dtype> dx1, dx2, dw1(w.shape()), dw2(w.shape()), db1(bias.shape()), db2(bias.shape());
    edaan::kernels::conv2d_backward(x, w, dy, c.stride, c.pad, &dx1, &dw1, &db1);
    edaan::reference::conv2d_backward(x, w, dy, c.stride, c.pad, &dx2, &dw2, &db2);
    CHECK(max_abs_diff(dx1, dx2) < tol);
    CHECK(max_abs_diff(dw1, dw2) < tol);
    CHECK(max_abs_diff(db1, db2) < tol);
  }
}

TEST_CASE_TEMPLATE("transposed convolution matches the reference", Dtype, float, double) {
  std::mt19937_64 rng(3);
  const double tol = sizeof(Dtype) == 4 ? 1e-4 : 1e-11;
  auto x = random_tensor<Dtype>({2, 4, 5, 3}, rng);
  auto w = random_tensor<Dtype>({4, 3, 4, 4}, rng);
  auto bias = random_tensor<Dtype>({3}, rng);
  auto y1 = edaan::kernels::conv_transpose2d_forward(x, w, &bias, 2, 1);
  auto y2 = edaan::reference::conv_transpose2d_forward(x, w, &bias, 2, 1);
  CHECK(y1.dim(2) == 10);
  CHECK(y1.dim(3) == 6);
  CHECK(max_abs_diff(y1, y2) < tol);
  auto dy = random_tensor<Dtype>(y1.shape(), rng);
  Tensor<Dtype> dx1, dx2, dw1(w.shape()), dw2(w.shape()), db1(bias.shape()), db2(bias.shape());
  edaan::kernels::conv_transpose2d_backward(x, w, dy, 2, 1, &dx1, &dw1, &db1);
  edaan::reference::conv_transpose2d_backward(x, w, dy, 2, 1, &dx2, &dw2, &db2);
  CHECK(max_abs_diff(dx1, dx2) < tol);
  CHECK(max_abs_diff(dw1, dw2) < tol);
  CHECK(max_abs_diff(db1, db2) < tol);
}

TEST_CASE_TEMPLATE("instance norm matches the reference", Dtype, float, double) {
  std::mt19937_64 rng(4);
  const double tol = sizeof(Dtype) == 4 ? 1e-4 : 1e-11;
  auto x = random_tensor<Dtype>({3, 5, 6, 4}, rng);
  auto gamma = random_tensor<Dtype>({5}, rng), beta = random_tensor<Dtype>({5}, rng);
  std::vector<Dtype> mean, inv_std;
  auto y1 = edaan::kernels::instance_norm_forward(x, gamma, beta, Dtype(1e-5), mean, inv_std);
  auto y2 = edaan::reference::instance_norm_forward(x, gamma, beta, Dtype(1e-5));
  CHECK(max_abs_diff(y1, y2) < tol);
  CHECK(mean.size() == 15);
}

TEST_CASE("kernel results are bitwise independent of the thread count") {
  std::mt19937_64 rng(5);
  auto x = random_tensor<float>({4, 3, 16, 8}, rng);
  auto w = random_tensor<float>({6, 3, 3, 3}, rng);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  auto y1 = edaan::kernels::conv2d_forward(x, w, static_cast<const Tensor<float>*>(nullptr), 1, 1);
  auto dy = random_tensor<float>(y1.shape(), rng);
  Tensor<float> dx1, dw1(w.shape());
  edaan::kernels::conv2d_backward(x, w, dy, 1, 1, &dx1, &dw1, static_cast<Tensor<float>*>(nullptr));
  omp_set_num_threads(3);
  auto y3 = edaan::kernels::conv2d_forward(x, w, static_cast<const Tensor<float>*>(nullptr), 1, 1);
  Tensor<float> dx3, dw3(w.shape());
  edaan::kernels::conv2d_backward(x, w, dy, 1, 1, &dx3, &dw3, static_cast<Tensor<float>*>(nullptr));
  omp_set_num_threads(saved);
  CHECK(y1.vec() == y3.vec());
  CHECK(dx1.vec() == dx3.vec());
  CHECK(dw1.vec() == dw3.vec());
}
