#include "edaan/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

namespace edaan::kernels {

namespace {

constexpr int kRowBlock = 16;
constexpr int kColBlock = 256;

// Computes one (rows x cols) tile of C += alpha * A * B with A (M x K) and
// B (K x N) row-major. Four rows of C share each streamed row of B.
template <typename Dtype>
void gemm_tile(int i0, int i1, int j0, int j1, int n, int k, Dtype alpha,
               const Dtype* __restrict a, const Dtype* __restrict b, Dtype* __restrict c) {
  const int nb = j1 - j0;
  int i = i0;
  for (; i + 4 <= i1; i += 4) {
    Dtype* __restrict c0 = c + static_cast<std::size_t>(i) * n + j0;
    Dtype* __restrict c1 = c0 + n;
    Dtype* __restrict c2 = c1 + n;
    Dtype* __restrict c3 = c2 + n;
    const Dtype* a0 = a + static_cast<std::size_t>(i) * k;
    const Dtype* a1 = a0 + k;
    const Dtype* a2 = a1 + k;
    const Dtype* a3 = a2 + k;
    for (int p = 0; p < k; ++p) {
      const Dtype* __restrict bp = b + static_cast<std::size_t>(p) * n + j0;
      const Dtype v0 = alpha * a0[p], v1 = alpha * a1[p], v2 = alpha * a2[p], v3 = alpha * a3[p];
      for (int j = 0; j < nb; ++j) {
        const Dtype bj = bp[j];
        c0[j] += v0 * bj;
        c1[j] += v1 * bj;
        c2[j] += v2 * bj;
        c3[j] += v3 * bj;
      }
    }
  }
  for (; i < i1; ++i) {
    Dtype* __restrict ci = c + static_cast<std::size_t>(i) * n + j0;
    const Dtype* ai = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const Dtype* __restrict bp = b + static_cast<std::size_t>(p) * n + j0;
      const Dtype v = alpha * ai[p];
      for (int j = 0; j < nb; ++j) ci[j] += v * bp[j];
    }
  }
}

template <typename Dtype>
void transpose(const Dtype* src, int rows, int cols, Dtype* dst) {
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      dst[static_cast<std::size_t>(c) * rows + r] = src[static_cast<std::size_t>(r) * cols + c];
}

void check_nchw(const Shape& s, const char* what) {
  if (s.size() != 4) throw ShapeError(std::string(what) + ": expected rank-4 tensor, got " + shape_string(s));
}

}  // namespace

template <typename Dtype>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, Dtype alpha, const Dtype* a,
          const Dtype* b, Dtype beta, Dtype* c) {
  const std::size_t mn = static_cast<std::size_t>(m) * n;
  if (beta == Dtype(0)) {
    std::fill(c, c + mn, Dtype(0));
  } else if (beta != Dtype(1)) {
    for (std::size_t i = 0; i < mn; ++i) c[i] *= beta;
  }
  if (m == 0 || n == 0 || k == 0) return;

  std::vector<Dtype> a_packed, b_packed;
  if (trans_a) {
    a_packed.resize(static_cast<std::size_t>(m) * k);
    transpose(a, k, m, a_packed.data());
    a = a_packed.data();
  }
  if (trans_b) {
    b_packed.resize(static_cast<std::size_t>(k) * n);
    transpose(b, n, k, b_packed.data());
    b = b_packed.data();
  }

  const int row_tiles = (m + kRowBlock - 1) / kRowBlock;
  const int col_tiles = (n + kColBlock - 1) / kColBlock;
  const int tiles = row_tiles * col_tiles;
  const double flops = 2.0 * m * n * k;
#pragma omp parallel for schedule(static) if (flops > 2e5 && tiles > 1)
  for (int t = 0; t < tiles; ++t) {
    const int ti = t / col_tiles, tj = t % col_tiles;
    const int i0 = ti * kRowBlock, i1 = std::min(m, i0 + kRowBlock);
    const int j0 = tj * kColBlock, j1 = std::min(n, j0 + kColBlock);
    gemm_tile(i0, i1, j0, j1, n, k, alpha, a, b, c);
  }
}

template <typename Dtype>
void im2col(const Dtype* image, const ConvGeometry& g, Dtype* col) {
  const int oh = g.out_height(), ow = g.out_width();
  const int kk = g.kernel;
  for (int ch = 0; ch < g.channels; ++ch) {
    const Dtype* plane = image + static_cast<std::size_t>(ch) * g.height * g.width;
    for (int ky = 0; ky < kk; ++ky) {
      for (int kx = 0; kx < kk; ++kx) {
        Dtype* row = col + (static_cast<std::size_t>(ch * kk + ky) * kk + kx) * oh * ow;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * g.stride - g.pad + ky;
          Dtype* out = row + static_cast<std::size_t>(y) * ow;
          if (iy < 0 || iy >= g.height) {
            std::fill(out, out + ow, Dtype(0));
            continue;
          }
          const Dtype* in = plane + static_cast<std::size_t>(iy) * g.width;
          for (int x = 0; x < ow; ++x) {
            const int ix = x * g.stride - g.pad + kx;
            out[x] = (ix >= 0 && ix < g.width) ? in[ix] : Dtype(0);
          }
        }
      }
    }
  }
}

template <typename Dtype>
void col2im_add(const Dtype* col, const ConvGeometry& g, Dtype* image) {
  const int oh = g.out_height(), ow = g.out_width();
  const int kk = g.kernel;
  for (int ch = 0; ch < g.channels; ++ch) {
    Dtype* plane = image + static_cast<std::size_t>(ch) * g.height * g.width;
    for (int ky = 0; ky < kk; ++ky) {
      for (int kx = 0; kx < kk; ++kx) {
        const Dtype* row = col + (static_cast<std::size_t>(ch * kk + ky) * kk + kx) * oh * ow;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.height) continue;
          Dtype* out = plane + static_cast<std::size_t>(iy) * g.width;
          const Dtype* in = row + static_cast<std::size_t>(y) * ow;
          for (int x = 0; x < ow; ++x) {
            const int ix = x * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.width) out[ix] += in[x];
          }
        }
      }
    }
  }
}

template <typename Dtype>
Tensor<Dtype> conv2d_forward(const Tensor<Dtype>& x, const Tensor<Dtype>& weight,
                             const Tensor<Dtype>* bias, int stride, int pad) {
  check_nchw(x.shape(), "conv2d input");
  check_nchw(weight.shape(), "conv2d weight");
  const int n = x.dim(0), co = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != x.dim(1))
    throw ShapeError("conv2d: input has " + std::to_string(x.dim(1)) + " channels, weight expects " +
                     std::to_string(weight.dim(1)));
  const ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), k, stride, pad};
  const int oh = g.out_height(), ow = g.out_width();
  Tensor<Dtype> y({n, co, oh, ow});
  const std::size_t in_step = x.stride0(), out_step = y.stride0();
  const int rows = g.col_rows(), cols = g.col_cols();

#pragma omp parallel if (n > 1)
  {
    std::vector<Dtype> col(static_cast<std::size_t>(rows) * cols);
#pragma omp for schedule(static)
    for (int s = 0; s < n; ++s) {
      im2col(x.data() + s * in_step, g, col.data());
      Dtype* out = y.data() + s * out_step;
      gemm<Dtype>(false, false, co, cols, rows, Dtype(1), weight.data(), col.data(), Dtype(0), out);
      if (bias)
        for (int c = 0; c < co; ++c) {
          const Dtype bv = (*bias)[c];
          Dtype* plane = out + static_cast<std::size_t>(c) * cols;
          for (int i = 0; i < cols; ++i) plane[i] += bv;
        }
    }
  }
  return y;
}

template <typename Dtype>
void conv2d_backward(const Tensor<Dtype>& x, const Tensor<Dtype>& weight, const Tensor<Dtype>& dy,
                     int stride, int pad, Tensor<Dtype>* dx, Tensor<Dtype>* dweight,
                     Tensor<Dtype>* dbias) {
  const int n = x.dim(0), co = weight.dim(0), k = weight.dim(2);
  const ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), k, stride, pad};
  const int rows = g.col_rows(), cols = g.col_cols();
  const std::size_t in_step = x.stride0(), out_step = dy.stride0();

  if (dbias) {
    for (int s = 0; s < n; ++s)
      for (int c = 0; c < co; ++c) {
        const Dtype* plane = dy.data() + s * out_step + static_cast<std::size_t>(c) * cols;
        Dtype acc = 0;
        for (int i = 0; i < cols; ++i) acc += plane[i];
        (*dbias)[c] += acc;
      }
  }
  if (dweight) {
    // Samples are reduced serially so the summation order is fixed; the gemm
    // itself is parallel over output tiles.
    std::vector<Dtype> col(static_cast<std::size_t>(rows) * cols);
    for (int s = 0; s < n; ++s) {
      im2col(x.data() + s * in_step, g, col.data());
      gemm<Dtype>(false, true, co, rows, cols, Dtype(1), dy.data() + s * out_step, col.data(),
                  Dtype(1), dweight->data());
    }
  }
  if (dx) {
    *dx = Tensor<Dtype>(x.shape());
#pragma omp parallel if (n > 1)
    {
      std::vector<Dtype> col(static_cast<std::size_t>(rows) * cols);
#pragma omp for schedule(static)
      for (int s = 0; s < n; ++s) {
        gemm<Dtype>(true, false, rows, cols, co, Dtype(1), weight.data(), dy.data() + s * out_step,
                    Dtype(0), col.data());
        col2im_add(col.data(), g, dx->data() + s * in_step);
      }
    }
  }
}

template <typename Dtype>
Tensor<Dtype> conv_transpose2d_forward(const Tensor<Dtype>& x, const Tensor<Dtype>& weight,
                                       const Tensor<Dtype>* bias, int stride, int pad) {
  check_nchw(x.shape(), "conv_transpose2d input");
  check_nchw(weight.shape(), "conv_transpose2d weight");
  const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (weight.dim(0) != ci)
    throw ShapeError("conv_transpose2d: input has " + std::to_string(ci) +
                     " channels, weight expects " + std::to_string(weight.dim(0)));
  const int co = weight.dim(1), k = weight.dim(2);
  const int oh = (h - 1) * stride - 2 * pad + k, ow = (w - 1) * stride - 2 * pad + k;
  // The output plane is the "image" whose im2col has the input's spatial size.
  const ConvGeometry g{co, oh, ow, k, stride, pad};
  const int rows = g.col_rows(), cols = h * w;
  Tensor<Dtype> y({n, co, oh, ow});
  const std::size_t in_step = x.stride0(), out_step = y.stride0();

#pragma omp parallel if (n > 1)
  {
    std::vector<Dtype> col(static_cast<std::size_t>(rows) * cols);
#pragma omp for schedule(static)
    for (int s = 0; s < n; ++s) {
      gemm<Dtype>(true, false, rows, cols, ci, Dtype(1), weight.data(), x.data() + s * in_step,
                  Dtype(0), col.data());
      Dtype* out = y.data() + s * out_step;
      col2im_add(col.data(), g, out);
      if (bias)
        for (int c = 0; c < co; ++c) {
          const Dtype bv = (*bias)[c];
          Dtype* plane = out + static_cast<std::size_t>(c) * oh * ow;
          for (int i = 0; i < oh * ow; ++i) plane[i] += bv;
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
  const ConvGeometry g{co, oh, ow, k, stride, pad};
  const int rows = g.col_rows(), cols = h * w;
  const std::size_t in_step = x.stride0(), out_step = dy.stride0();

  if (dbias) {
    for (int s = 0; s < n; ++s)
      for (int c = 0; c < co; ++c) {
        const Dtype* plane = dy.data() + s * out_step + static_cast<std::size_t>(c) * oh * ow;
        Dtype acc = 0;
        for (int i = 0; i < oh * ow; ++i) acc += plane[i];
        (*dbias)[c] += acc;
      }
  }
  std::vector<Dtype> col(static_cast<std::size_t>(rows) * cols);
  if (dweight) {
    for (int s = 0; s < n; ++s) {
      im2col(dy.data() + s * out_step, g, col.data());
      gemm<Dtype>(false, true, ci, rows, cols, Dtype(1), x.data() + s * in_step, col.data(),
                  Dtype(1), dweight->data());
    }
  }
  if (dx) {
    *dx = Tensor<Dtype>(x.shape());
#pragma omp parallel if (n > 1)
    {
      std::vector<Dtype> local(static_cast<std::size_t>(rows) * cols);
#pragma omp for schedule(static)
      for (int s = 0; s < n; ++s) {
        im2col(dy.data() + s * out_step, g, local.data());
        gemm<Dtype>(false, false, ci, cols, rows, Dtype(1), weight.data(), local.data(), Dtype(0),
                    dx->data() + s * in_step);
      }
    }
  }
}

template <typename Dtype>
Tensor<Dtype> instance_norm_forward(const Tensor<Dtype>& x, const Tensor<Dtype>& gamma,
                                    const Tensor<Dtype>& beta, Dtype eps,
                                    std::vector<Dtype>& mean, std::vector<Dtype>& inv_std) {
  check_nchw(x.shape(), "instance_norm input");
  const int n = x.dim(0), c = x.dim(1);
  const int hw = x.dim(2) * x.dim(3);
  if (static_cast<int>(gamma.count()) != c || static_cast<int>(beta.count()) != c)
    throw ShapeError("instance_norm: affine parameters do not match channel count");
  Tensor<Dtype> y(x.shape());
  mean.assign(static_cast<std::size_t>(n) * c, Dtype(0));
  inv_std.assign(static_cast<std::size_t>(n) * c, Dtype(0));
  const int planes = n * c;
#pragma omp parallel for schedule(static) if (planes > 8)
  for (int p = 0; p < planes; ++p) {
    const Dtype* in = x.data() + static_cast<std::size_t>(p) * hw;
    Dtype* out = y.data() + static_cast<std::size_t>(p) * hw;
    Dtype sum = 0;
    for (int i = 0; i < hw; ++i) sum += in[i];
    const Dtype mu = sum / hw;
    Dtype sq = 0;
    for (int i = 0; i < hw; ++i) {
      const Dtype d = in[i] - mu;
      sq += d * d;
    }
    const Dtype is = Dtype(1) / std::sqrt(sq / hw + eps);
    mean[p] = mu;
    inv_std[p] = is;
    const Dtype scale = gamma[p % c] * is, shift = beta[p % c];
    for (int i = 0; i < hw; ++i) out[i] = (in[i] - mu) * scale + shift;
  }
  return y;
}

template <typename Dtype>
void instance_norm_backward(const Tensor<Dtype>& x, const Tensor<Dtype>& gamma,
                            const std::vector<Dtype>& mean, const std::vector<Dtype>& inv_std,
                            const Tensor<Dtype>& dy, Tensor<Dtype>* dx, Tensor<Dtype>* dgamma,
                            Tensor<Dtype>* dbeta) {
  const int n = x.dim(0), c = x.dim(1);
  const int hw = x.dim(2) * x.dim(3);
  const int planes = n * c;
  std::vector<Dtype> sum_dy(planes), sum_dy_xhat(planes);
  if (dx) *dx = Tensor<Dtype>(x.shape());
#pragma omp parallel for schedule(static) if (planes > 8)
  for (int p = 0; p < planes; ++p) {
    const Dtype* in = x.data() + static_cast<std::size_t>(p) * hw;
    const Dtype* g = dy.data() + static_cast<std::size_t>(p) * hw;
    const Dtype mu = mean[p], is = inv_std[p];
    Dtype s1 = 0, s2 = 0;
    for (int i = 0; i < hw; ++i) {
      s1 += g[i];
      s2 += g[i] * (in[i] - mu) * is;
    }
    sum_dy[p] = s1;
    sum_dy_xhat[p] = s2;
    if (dx) {
      Dtype* out = dx->data() + static_cast<std::size_t>(p) * hw;
      const Dtype scale = gamma[p % c] * is / hw;
      for (int i = 0; i < hw; ++i) {
        const Dtype xhat = (in[i] - mu) * is;
        out[i] = scale * (hw * g[i] - s1 - xhat * s2);
      }
    }
  }
  for (int p = 0; p < planes; ++p) {
    if (dgamma) (*dgamma)[p % c] += sum_dy_xhat[p];
    if (dbeta) (*dbeta)[p % c] += sum_dy[p];
  }
}

#define EDAAN_INSTANTIATE_KERNELS(T)                                                          \
  template void gemm<T>(bool, bool, int, int, int, T, const T*, const T*, T, T*);             \
  template void im2col<T>(const T*, const ConvGeometry&, T*);                                 \
  template void col2im_add<T>(const T*, const ConvGeometry&, T*);                             \
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
                                              const Tensor<T>&, T, std::vector<T>&,           \
                                              std::vector<T>&);                               \
  template void instance_norm_backward<T>(const Tensor<T>&, const Tensor<T>&,                 \
                                          const std::vector<T>&, const std::vector<T>&,       \
                                          const Tensor<T>&, Tensor<T>*, Tensor<T>*, Tensor<T>*);

EDAAN_INSTANTIATE_KERNELS(float)
EDAAN_INSTANTIATE_KERNELS(double)

}  // namespace edaan::kernels
