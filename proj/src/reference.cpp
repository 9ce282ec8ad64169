#include "edaan/reference.hpp"

#include <cmath>

namespace edaan::reference {

template <typename Dtype>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, Dtype alpha, const Dtype* a,
          const Dtype* b, Dtype beta, Dtype* c) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      Dtype acc = 0;
      for (int p = 0; p < k; ++p) {
        const Dtype av = trans_a ? a[static_cast<std::size_t>(p) * m + i] : a[static_cast<std::size_t>(i) * k + p];
        const Dtype bv = trans_b ? b[static_cast<std::size_t>(j) * k + p] : b[static_cast<std::size_t>(p) * n + j];
        acc += av * bv;
      }
      Dtype& out = c[static_cast<std::size_t>(i) * n + j];
      out = alpha * acc + (beta == Dtype(0) ? Dtype(0) : beta * out);
    }
}

template <typename Dtype>
Tensor<Dtype> conv2d_forward(const Tensor<Dtype>& x, const Tensor<Dtype>& weight,
                             const Tensor<Dtype>* bias, int stride, int pad) {
  const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int co = weight.dim(0), k = weight.dim(2);
  const int oh = (h + 2 * pad - k) / stride + 1, ow = (w + 2 * pad - k) / stride + 1;
  Tensor<Dtype> y({n, co, oh, ow});
  for (int s = 0; s < n; ++s)
    for (int o = 0; o < co; ++o)
      for (int yy = 0; yy < oh; ++yy)
        for (int xx = 0; xx < ow; ++xx) {
          Dtype acc = bias ? (*bias)[o] : Dtype(0);
          for (int c = 0; c < ci; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = yy * stride - pad + ky, ix = xx * stride - pad + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += weight.at(o, c, ky, kx) * x.at(s, c, iy, ix);
              }
          y.at(s, o, yy, xx) = acc;
        }
  return y;
}

template <typename Dtype>
void conv2d_backward(const Tensor<Dtype>& x, const Tensor<Dtype>& weight, const Tensor<Dtype>& dy,
                     int stride, int pad, Tensor<Dtype>* dx, Tensor<Dtype>* dweight,
                     Tensor<Dtype>* dbias) {
  const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int co = weight.dim(0), k = weight.dim(2);
  const int oh = dy.dim(2), ow = dy.dim(3);
  if (dx) *dx = Tensor<Dtype>(x.shape());
  for (int s = 0; s < n; ++s)
    for (int o = 0; o < co; ++o)
      for (int yy = 0; yy < oh; ++yy)
        for (int xx = 0; xx < ow; ++xx) {
          const Dtype g = dy.at(s, o, yy, xx);
          if (dbias) (*dbias)[o] += g;
          for (int c = 0; c < ci; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = yy * stride - pad + ky, ix = xx * stride - pad + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                if (dweight) dweight->at(o, c, ky, kx) += g * x.at(s, c, iy, ix);
                if (dx) dx->at(s, c, iy, ix) += g * weight.at(o, c, ky, kx);
              }
        }
}

template <typename Dtype>
Tensor<Dtype> conv_transpose2d_forward(const Tensor<Dtype>& x, const Tensor<Dtype>& weight,
                                       const Tensor<Dtype>* bias, int stride, int pad) {
  const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int co = weight.dim(1), k = weight.dim(2);
  const int oh = (h - 1) * stride - 2 * pad + k, ow = (w - 1) * stride - 2 * pad + k;
  Tensor<Dtype> y({n, co, oh, ow});
  for (int s = 0; s < n; ++s) {
    if (bias)
      for (int o = 0; o < co; ++o)
        for (int i = 0; i < oh; ++i)
          for (int j = 0; j < ow; ++j) y.at(s, o, i, j) = (*bias)[o];
    // Scatter each input pixel through the kernel.
    for (int c = 0; c < ci; ++c)
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx) {
          const Dtype v = x.at(s, c, yy, xx);
          for (int o = 0; o < co; ++o)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int oy = yy * stride - pad + ky, ox = xx * stride - pad + kx;
                if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
                y.at(s, o, oy, ox) += v * weight.at(c, o, ky, kx);
              }
        }
  }
  return y;
}

template <typename Dtype>
void conv_transpose2d_backward(const Tensor<Dtype>& x, const Tensor<Dtype>& weight,
                               const Tensor<Dtype>& dy, int stride, int pad, Tensor<Dtype>* dx,
                               Tensor<Dtype>* dweight, Tensor<Dtype>* dbias) {
  const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int co = weight.dim(1), k = weight.dim(2);
  const int oh = dy.dim(2), ow = dy.dim(3);
  if (dx) *dx = Tensor<Dtype>(x.shape());
  for (int s = 0; s < n; ++s) {
    if (dbias)
      for (int o = 0; o < co; ++o)
        for (int i = 0; i < oh; ++i)
          for (int j = 0; j < ow; ++j) (*dbias)[o] += dy.at(s, o, i, j);
    for (int c = 0; c < ci; ++c)
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx)
          for (int o = 0; o < co; ++o)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int oy = yy * stride - pad + ky, ox = xx * stride - pad + kx;
                if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
                const Dtype g = dy.at(s, o, oy, ox);
                if (dx) dx->at(s, c, yy, xx) += g * weight.at(c, o, ky, kx);
                if (dweight) dweight->at(c, o, ky, kx) += g * x.at(s, c, yy, xx);
              }
  }
}

template <typename Dtype>
Tensor<Dtype> instance_norm_forward(const Tensor<Dtype>& x, const Tensor<Dtype>& gamma,
                                    const Tensor<Dtype>& beta, Dtype eps) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<Dtype> y(x.shape());
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch) {
      double sum = 0, sq = 0;
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) sum += x.at(s, ch, i, j);
      const double mu = sum / (h * w);
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) sq += (x.at(s, ch, i, j) - mu) * (x.at(s, ch, i, j) - mu);
      const double sd = std::sqrt(sq / (h * w) + eps);
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          y.at(s, ch, i, j) = static_cast<Dtype>(gamma[ch] * (x.at(s, ch, i, j) - mu) / sd + beta[ch]);
    }
  return y;
}

#define EDAAN_INSTANTIATE_REFERENCE(T)                                                        \
  template void gemm<T>(bool, bool, int, int, int, T, const T*, const T*, T, T*);             \
  template Tensor<T> conv2d_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*,  \
                                       int, int);                                             \
  template void conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, \
                                   int, Tensor<T>*, Tensor<T>*, Tensor<T>*);                  \
  template Tensor<T> conv_transpose2d_forward<T>(const Tensor<T>&, const Tensor<T>&,          \
                                                 const Tensor<T>*, int, int);                 \
  template void conv_transpose2d_backward<T>(const Tensor<T>&, const Tensor<T>&,              \
                                             const Tensor<T>&, int, int, Tensor<T>*,          \
                                             Tensor<T>*, Tensor<T>*);                         \
  template Tensor<T> instance_norm_forward<T>(const Tensor<T>&, const Tensor<T>&,             \
                                              const Tensor<T>&, T);

EDAAN_INSTANTIATE_REFERENCE(float)
EDAAN_INSTANTIATE_REFERENCE(double)

}  // namespace edaan::reference
