#ifndef EDAAN_KERNELS_HPP_
#define EDAAN_KERNELS_HPP_

// OpenMP-parallel compute kernels. Every kernel partitions work so that each
// output element is produced by exactly one thread with a fixed reduction
// order; results are bitwise independent of the thread count.
//
// Serial reference versions of the same operations live in reference.hpp and
// are used by the unit tests and the benchmark.

#include "edaan/tensor.hpp"

namespace edaan::kernels {

// Spatial geometry of one convolution input plane stack.
struct ConvGeometry {
  int channels = 0;
  int height = 0;
  int width = 0;
  int kernel = 1;
  int stride = 1;
  int pad = 0;

  int out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  int out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
  int col_rows() const { return channels * kernel * kernel; }
  int col_cols() const { return out_height() * out_width(); }
};

// C = alpha * op(A) * op(B) + beta * C, all row-major and contiguous.
// op(A) is M x K, op(B) is K x N.
template <typename Dtype>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, Dtype alpha, const Dtype* a,
          const Dtype* b, Dtype beta, Dtype* c);

template <typename Dtype>
void im2col(const Dtype* image, const ConvGeometry& g, Dtype* col);

// Accumulates columns back into `image` (which is NOT cleared first).
template <typename Dtype>
void col2im_add(const Dtype* col, const ConvGeometry& g, Dtype* image);

// x: N x Ci x H x W, weight: Co x Ci x k x k, bias: Co (optional).
template <typename Dtype>
Tensor<Dtype> conv2d_forward(const Tensor<Dtype>& x, const Tensor<Dtype>& weight,
                             const Tensor<Dtype>* bias, int stride, int pad);

// Any of dx/dweight/dbias may be null. Gradients are accumulated (+=) into
// dweight/dbias and written into dx.
template <typename Dtype>
void conv2d_backward(const Tensor<Dtype>& x, const Tensor<Dtype>& weight, const Tensor<Dtype>& dy,
                     int stride, int pad, Tensor<Dtype>* dx, Tensor<Dtype>* dweight,
                     Tensor<Dtype>* dbias);

// Transposed convolution. weight: Ci x Co x k x k; output spatial size is
// (H - 1) * stride - 2 * pad + k.
template <typename Dtype>
Tensor<Dtype> conv_transpose2d_forward(const Tensor<Dtype>& x, const Tensor<Dtype>& weight,
                                       const Tensor<Dtype>* bias, int stride, int pad);

template <typename Dtype>
void conv_transpose2d_backward(const Tensor<Dtype>& x, const Tensor<Dtype>& weight,
                               const Tensor<Dtype>& dy, int stride, int pad, Tensor<Dtype>* dx,
                               Tensor<Dtype>* dweight, Tensor<Dtype>* dbias);

// Per-sample, per-channel normalization over the spatial axes.
// mean / inv_std are N*C vectors saved for the backward pass.
template <typename Dtype>
Tensor<Dtype> instance_norm_forward(const Tensor<Dtype>& x, const Tensor<Dtype>& gamma,
                                    const Tensor<Dtype>& beta, Dtype eps,
                                    std::vector<Dtype>& mean, std::vector<Dtype>& inv_std);

template <typename Dtype>
void instance_norm_backward(const Tensor<Dtype>& x, const Tensor<Dtype>& gamma,
                            const std::vector<Dtype>& mean, const std::vector<Dtype>& inv_std,
                            const Tensor<Dtype>& dy, Tensor<Dtype>* dx, Tensor<Dtype>* dgamma,
                            Tensor<Dtype>* dbeta);

// Parallel elementwise map: out[i] = f(in[i]).
template <typename Dtype, typename Fn>
void map(std::span<const Dtype> in, std::span<Dtype> out, Fn f) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(in.size());
#pragma omp parallel for schedule(static) if (n > 32768)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = f(in[i]);
}

}  // namespace edaan::kernels

#endif  // EDAAN_KERNELS_HPP_
