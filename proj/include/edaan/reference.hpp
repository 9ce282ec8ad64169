#ifndef EDAAN_REFERENCE_HPP_
#define EDAAN_REFERENCE_HPP_

// Serial, loop-nest reference implementations of the kernels in kernels.hpp.
// They compute the same quantities by direct summation (no im2col, no
// blocking) and exist for testing and benchmarking only.

#include "edaan/tensor.hpp"

namespace edaan::reference {

template <typename Dtype>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, Dtype alpha, const Dtype* a,
          const Dtype* b, Dtype beta, Dtype* c);

template <typename Dtype>
Tensor<Dtype> conv2d_forward(const Tensor<Dtype>& x, const Tensor<Dtype>& weight,
                             const Tensor<Dtype>* bias, int stride, int pad);

template <typename Dtype>
void conv2d_backward(const Tensor<Dtype>& x, const Tensor<Dtype>& weight, const Tensor<Dtype>& dy,
                     int stride, int pad, Tensor<Dtype>* dx, Tensor<Dtype>* dweight,
                     Tensor<Dtype>* dbias);

template <typename Dtype>
Tensor<Dtype> conv_transpose2d_forward(const Tensor<Dtype>& x, const Tensor<Dtype>& weight,
                                       const Tensor<Dtype>* bias, int stride, int pad);

template <typename Dtype>
void conv_transpose2d_backward(const Tensor<Dtype>& x, const Tensor<Dtype>& weight,
                               const Tensor<Dtype>& dy, int stride, int pad, Tensor<Dtype>* dx,
                               Tensor<Dtype>* dweight, Tensor<Dtype>* dbias);

template <typename Dtype>
Tensor<Dtype> instance_norm_forward(const Tensor<Dtype>& x, const Tensor<Dtype>& gamma,
                                    const Tensor<Dtype>& beta, Dtype eps);

}  // namespace edaan::reference

#endif  // EDAAN_REFERENCE_HPP_
