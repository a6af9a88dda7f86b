#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

#include "udfsketch/nn/tensor.hpp"

namespace udfsketch::nn {

template <class S>
using RowMatrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using MatrixMap = Eigen::Map<RowMatrix<S>>;
template <class S>
using ConstMatrixMap = Eigen::Map<const RowMatrix<S>>;

// ---------------------------------------------------------------------------
// 3x3 convolution, zero "same" padding, stride 1 or 2. Output spatial size is
// ceil(input / stride). Lowered to one GEMM over the whole batch.

namespace detail {

inline int conv_out_size(int in, int stride) { return (in + stride - 1) / stride; }

// Output range [begin, end) whose input index o*stride + k - 1 lies in [0, in).
inline int tap_begin(int k) { return k == 0 ? 1 : 0; }
inline int tap_end(int k, int stride, int in, int out) { return std::min(out, (in - k) / stride + 1); }

// Column matrix of shape (C*9, N*Ho*Wo); row ci*9 + ky*3 + kx, column n*P + oy*Wo + ox.
template <class S>
void im2col(const Tensor<S>& x, int stride, std::vector<S>& col) {
  const int n_batch = x.batch(), c_in = x.channels(), h = x.height(), w = x.width();
  const int ho = conv_out_size(h, stride), wo = conv_out_size(w, stride);
  const std::size_t p = static_cast<std::size_t>(ho) * wo;
  const std::size_t cols = p * n_batch;
  col.resize(static_cast<std::size_t>(c_in) * 9 * cols);
  for (int ci = 0; ci < c_in; ++ci) {
    for (int ky = 0; ky < 3; ++ky) {
      const int oy0 = tap_begin(ky), oy1 = tap_end(ky, stride, h, ho);
      for (int kx = 0; kx < 3; ++kx) {
        const int ox0 = tap_begin(kx), ox1 = tap_end(kx, stride, w, wo);
        S* row = col.data() + (static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * cols;
        for (int n = 0; n < n_batch; ++n) {
          const S* src = x.channel_ptr(n, ci);
          S* dst = row + n * p;
          for (int oy = 0; oy < ho; ++oy) {
            S* d_row = dst + oy * wo;
            if (oy < oy0 || oy >= oy1) {
              std::fill(d_row, d_row + wo, S{0});
              continue;
            }
            const S* s_row = src + static_cast<std::ptrdiff_t>(oy * stride + ky - 1) * w + (kx - 1);
            for (int ox = 0; ox < ox0; ++ox) d_row[ox] = S{0};
            for (int ox = ox0; ox < ox1; ++ox) d_row[ox] = s_row[ox * stride];
            for (int ox = ox1; ox < wo; ++ox) d_row[ox] = S{0};
          }
        }
      }
    }
  }
}

template <class S>
void col2im(const S* col, int stride, Tensor<S>& dx) {
  const int n_batch = dx.batch(), c_in = dx.channels(), h = dx.height(), w = dx.width();
  const int ho = conv_out_size(h, stride), wo = conv_out_size(w, stride);
  const std::size_t p = static_cast<std::size_t>(ho) * wo;
  const std::size_t cols = p * n_batch;
  dx.fill(S{0});
  for (int ci = 0; ci < c_in; ++ci) {
    for (int ky = 0; ky < 3; ++ky) {
      const int oy0 = tap_begin(ky), oy1 = tap_end(ky, stride, h, ho);
      for (int kx = 0; kx < 3; ++kx) {
        const int ox0 = tap_begin(kx), ox1 = tap_end(kx, stride, w, wo);
        const S* row = col + (static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * cols;
        for (int n = 0; n < n_batch; ++n) {
          S* dst = dx.channel_ptr(n, ci);
          const S* src = row + n * p;
          for (int oy = oy0; oy < oy1; ++oy) {
            S* d_row = dst + static_cast<std::ptrdiff_t>(oy * stride + ky - 1) * w + (kx - 1);
            const S* s_row = src + oy * wo;
            for (int ox = ox0; ox < ox1; ++ox) d_row[ox * stride] += s_row[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// weight: (Cout, Cin, 3, 3); bias: (Cout). When `col` is given it receives the
/// column matrix, which conv2d_backward can reuse.
template <class S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& weight, const Tensor<S>& bias, int stride,
                 std::vector<S>* col = nullptr) {
  require(x.rank() == 4, ErrorCode::shape_error, "conv2d input must be rank 4");
  require(stride == 1 || stride == 2, ErrorCode::parameter_error, "conv2d stride must be 1 or 2");
  require(weight.rank() == 4 && weight.dim(2) == 3 && weight.dim(3) == 3, ErrorCode::shape_error,
          "conv2d kernel must be 3x3");
  require(weight.dim(1) == x.channels(), ErrorCode::shape_error, "conv2d channel mismatch");
  require(bias.numel() == static_cast<std::size_t>(weight.dim(0)), ErrorCode::shape_error, "conv2d bias mismatch");
  const int c_out = weight.dim(0);
  const int n_batch = x.batch();
  const int ho = detail::conv_out_size(x.height(), stride), wo = detail::conv_out_size(x.width(), stride);
  const std::size_t p = static_cast<std::size_t>(ho) * wo;
  const int k = x.channels() * 9;

  std::vector<S> local;
  std::vector<S>& cm = col ? *col : local;
  detail::im2col(x, stride, cm);
  RowMatrix<S> out(c_out, static_cast<Eigen::Index>(p * n_batch));
  out.noalias() = ConstMatrixMap<S>(weight.data.data(), c_out, k) *
                  ConstMatrixMap<S>(cm.data(), k, static_cast<Eigen::Index>(p * n_batch));

  Tensor<S> y({n_batch, c_out, ho, wo});
  for (int n = 0; n < n_batch; ++n)
    for (int co = 0; co < c_out; ++co) {
      const S* src = out.data() + static_cast<std::size_t>(co) * p * n_batch + n * p;
      S* dst = y.channel_ptr(n, co);
      const S b = bias[co];
      for (std::size_t i = 0; i < p; ++i) dst[i] = src[i] + b;
    }
  return y;
}

/// Returns dx; accumulates into dweight and dbias. `col` is the column matrix from the
/// forward call on `x`, recomputed when absent.
template <class S>
Tensor<S> conv2d_backward(const Tensor<S>& x, const Tensor<S>& weight, int stride, const Tensor<S>& dy,
                          Tensor<S>& dweight, Tensor<S>& dbias, const std::vector<S>* col = nullptr) {
  const int c_out = weight.dim(0);
  const int n_batch = x.batch();
  const int ho = dy.height(), wo = dy.width();
  const std::size_t p = static_cast<std::size_t>(ho) * wo;
  const int k = x.channels() * 9;
  const auto cols = static_cast<Eigen::Index>(p * n_batch);

  RowMatrix<S> g(c_out, cols);
  for (int n = 0; n < n_batch; ++n)
    for (int co = 0; co < c_out; ++co) {
      const S* src = dy.channel_ptr(n, co);
      S* dst = g.data() + static_cast<std::size_t>(co) * p * n_batch + n * p;
      S sum = 0;
      for (std::size_t i = 0; i < p; ++i) {
        dst[i] = src[i];
        sum += src[i];
      }
      dbias[co] += sum;
    }

  std::vector<S> local;
  if (!col) {
    detail::im2col(x, stride, local);
    col = &local;
  }
  MatrixMap<S>(dweight.data.data(), c_out, k).noalias() += g * ConstMatrixMap<S>(col->data(), k, cols).transpose();

  RowMatrix<S> dcol(k, cols);
  dcol.noalias() = ConstMatrixMap<S>(weight.data.data(), c_out, k).transpose() * g;
  Tensor<S> dx(x.shape);
  detail::col2im(dcol.data(), stride, dx);
  return dx;
}

// ---------------------------------------------------------------------------
// Instance normalization over each (batch, channel) plane, then per-channel affine.
// A 1x1 plane has no defined variance and passes through the affine only.

template <class S>
struct InstanceNormCache {
  Tensor<S> normalized;
  std::vector<S> inv_std;
};

inline constexpr double kInstanceNormEps = 1e-5;

template <class S>
Tensor<S> instance_norm(const Tensor<S>& x, const Tensor<S>& scale, const Tensor<S>& shift,
                        InstanceNormCache<S>* cache = nullptr) {
  require(x.rank() == 4, ErrorCode::shape_error, "instance_norm input must be rank 4");
  require(scale.numel() == static_cast<std::size_t>(x.channels()) && shift.numel() == scale.numel(),
          ErrorCode::shape_error, "instance_norm affine size mismatch");
  const int n_batch = x.batch(), c = x.channels();
  const std::size_t m = x.plane();
  Tensor<S> y(x.shape);
  Tensor<S> xhat(x.shape);
  std::vector<S> inv_std(static_cast<std::size_t>(n_batch) * c, S{1});
  for (int n = 0; n < n_batch; ++n) {
    for (int ch = 0; ch < c; ++ch) {
      const S* src = x.channel_ptr(n, ch);
      S* nrm = xhat.channel_ptr(n, ch);
      S* dst = y.channel_ptr(n, ch);
      if (m == 1) {
        nrm[0] = src[0];
        dst[0] = scale[ch] * src[0] + shift[ch];
        continue;
      }
      double mean = 0.0;
      for (std::size_t i = 0; i < m; ++i) mean += src[i];
      mean /= static_cast<double>(m);
      double var = 0.0;
      for (std::size_t i = 0; i < m; ++i) var += (src[i] - mean) * (src[i] - mean);
      var /= static_cast<double>(m);
      const S is = static_cast<S>(1.0 / std::sqrt(var + kInstanceNormEps));
      inv_std[static_cast<std::size_t>(n) * c + ch] = is;
      for (std::size_t i = 0; i < m; ++i) {
        nrm[i] = static_cast<S>(src[i] - mean) * is;
        dst[i] = scale[ch] * nrm[i] + shift[ch];
      }
    }
  }
  if (cache) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <class S>
Tensor<S> instance_norm_backward(const InstanceNormCache<S>& cache, const Tensor<S>& scale, const Tensor<S>& dy,
                                 Tensor<S>& dscale, Tensor<S>& dshift) {
  const int n_batch = dy.batch(), c = dy.channels();
  const std::size_t m = dy.plane();
  Tensor<S> dx(dy.shape);
  for (int n = 0; n < n_batch; ++n) {
    for (int ch = 0; ch < c; ++ch) {
      const S* g = dy.channel_ptr(n, ch);
      const S* xh = cache.normalized.channel_ptr(n, ch);
      S* out = dx.channel_ptr(n, ch);
      double sum_g = 0.0, sum_gx = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        sum_g += g[i];
        sum_gx += static_cast<double>(g[i]) * xh[i];
      }
      dscale[ch] += static_cast<S>(sum_gx);
      dshift[ch] += static_cast<S>(sum_g);
      if (m == 1) {
        out[0] = g[0] * scale[ch];
        continue;
      }
      // dx = inv_std * scale * (g - mean(g) - xhat * mean(g * xhat))
      const S is = cache.inv_std[static_cast<std::size_t>(n) * c + ch];
      const S mg = static_cast<S>(sum_g / static_cast<double>(m));
      const S mgx = static_cast<S>(sum_gx / static_cast<double>(m));
      const S k = is * scale[ch];
      for (std::size_t i = 0; i < m; ++i) out[i] = k * (g[i] - mg - xh[i] * mgx);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Elementwise and structural ops.

template <class S>
S sigmoid(S x) {
  if (x >= 0) return S{1} / (S{1} + std::exp(-x));
  const S e = std::exp(x);
  return e / (S{1} + e);
}

template <class S>
using ArrayMap = Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>;
template <class S>
using ConstArrayMap = Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>;

namespace detail {

template <class S>
auto sigmoid_array(const ConstArrayMap<S>& x) {
  return S{1} / (S{1} + (-x).exp());
}

// Evaluates fn(dst, offset, count) into a 64-byte aligned scratch and copies out.
// Eigen splits unaligned destinations into scalar and packet lanes by address, and the
// two exp paths round differently; a fixed alignment keeps results address-independent.
template <class S, class Fn>
void eval_aligned(std::size_t n, S* out, Fn&& fn) {
  constexpr std::size_t kChunk = 1024;
  alignas(64) S buf[kChunk];
  for (std::size_t i = 0; i < n; i += kChunk) {
    const auto m = static_cast<Eigen::Index>(std::min(kChunk, n - i));
    Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>, Eigen::Aligned64> dst(buf, m);
    fn(dst, static_cast<Eigen::Index>(i), m);
    std::copy_n(buf, m, out + i);
  }
}

}  // namespace detail

template <class S>
Tensor<S> silu(const Tensor<S>& x) {
  Tensor<S> y(x.shape);
  detail::eval_aligned(x.numel(), y.data.data(), [&](auto& dst, Eigen::Index i, Eigen::Index m) {
    const ConstArrayMap<S> xa(x.data.data() + i, m);
    dst = xa * detail::sigmoid_array(xa);
  });
  return y;
}

template <class S>
Tensor<S> silu_backward(const Tensor<S>& x, const Tensor<S>& dy) {
  Tensor<S> dx(x.shape);
  detail::eval_aligned(x.numel(), dx.data.data(), [&](auto& dst, Eigen::Index i, Eigen::Index m) {
    const ConstArrayMap<S> xa(x.data.data() + i, m);
    const ConstArrayMap<S> g(dy.data.data() + i, m);
    dst = detail::sigmoid_array(xa);
    dst = g * dst * (S{1} + xa * (S{1} - dst));
  });
  return dx;
}

template <class S>
Tensor<S> sigmoid(const Tensor<S>& x) {
  Tensor<S> y(x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = sigmoid(x[i]);
  return y;
}

/// Backward through y = sigmoid(x) given the forward output y.
template <class S>
Tensor<S> sigmoid_backward(const Tensor<S>& y, const Tensor<S>& dy) {
  Tensor<S> dx(y.shape);
  for (std::size_t i = 0; i < y.numel(); ++i) dx[i] = dy[i] * y[i] * (S{1} - y[i]);
  return dx;
}

/// x: (N, in); weight: (out, in); bias: (out).
template <class S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& weight, const Tensor<S>& bias) {
  require(x.rank() == 2 && weight.rank() == 2 && weight.dim(1) == x.dim(1), ErrorCode::shape_error,
          "linear shape mismatch");
  require(bias.numel() == static_cast<std::size_t>(weight.dim(0)), ErrorCode::shape_error, "linear bias mismatch");
  const int n = x.dim(0), in = x.dim(1), out = weight.dim(0);
  Tensor<S> y({n, out});
  MatrixMap<S> ym(y.data.data(), n, out);
  ym.noalias() = ConstMatrixMap<S>(x.data.data(), n, in) * ConstMatrixMap<S>(weight.data.data(), out, in).transpose();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < out; ++j) ym(i, j) += bias[j];
  return y;
}

template <class S>
Tensor<S> linear_backward(const Tensor<S>& x, const Tensor<S>& weight, const Tensor<S>& dy, Tensor<S>& dweight,
                          Tensor<S>& dbias) {
  const int n = x.dim(0), in = x.dim(1), out = weight.dim(0);
  ConstMatrixMap<S> g(dy.data.data(), n, out);
  MatrixMap<S>(dweight.data.data(), out, in).noalias() += g.transpose() * ConstMatrixMap<S>(x.data.data(), n, in);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < out; ++j) dbias[j] += g(i, j);
  Tensor<S> dx(x.shape);
  MatrixMap<S>(dx.data.data(), n, in).noalias() = g * ConstMatrixMap<S>(weight.data.data(), out, in);
  return dx;
}

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape(a, b, "add shape mismatch");
  Tensor<S> y(a.shape);
  for (std::size_t i = 0; i < a.numel(); ++i) y[i] = a[i] + b[i];
  return y;
}

template <class S>
void add_inplace(Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape(a, b, "add shape mismatch");
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] += b[i];
}

/// Adds a per-(batch, channel) bias, bias shape (N, C), to an image tensor.
template <class S>
void add_channel_bias(Tensor<S>& x, const Tensor<S>& bias) {
  require(bias.rank() == 2 && bias.dim(0) == x.batch() && bias.dim(1) == x.channels(), ErrorCode::shape_error,
          "channel bias shape mismatch");
  const std::size_t m = x.plane();
  for (int n = 0; n < x.batch(); ++n)
    for (int c = 0; c < x.channels(); ++c) {
      S* p = x.channel_ptr(n, c);
      const S b = bias[static_cast<std::size_t>(n) * x.channels() + c];
      for (std::size_t i = 0; i < m; ++i) p[i] += b;
    }
}

template <class S>
Tensor<S> channel_bias_backward(const Tensor<S>& dy) {
  Tensor<S> db({dy.batch(), dy.channels()});
  const std::size_t m = dy.plane();
  for (int n = 0; n < dy.batch(); ++n)
    for (int c = 0; c < dy.channels(); ++c) {
      const S* p = dy.channel_ptr(n, c);
      S s = 0;
      for (std::size_t i = 0; i < m; ++i) s += p[i];
      db[static_cast<std::size_t>(n) * dy.channels() + c] = s;
    }
  return db;
}

template <class S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
  require(a.rank() == 4 && b.rank() == 4 && a.batch() == b.batch() && a.height() == b.height() &&
              a.width() == b.width(),
          ErrorCode::shape_error, "concat_channels shape mismatch");
  Tensor<S> y({a.batch(), a.channels() + b.channels(), a.height(), a.width()});
  const std::size_t m = a.plane();
  for (int n = 0; n < a.batch(); ++n) {
    std::copy_n(a.channel_ptr(n, 0), m * a.channels(), y.channel_ptr(n, 0));
    std::copy_n(b.channel_ptr(n, 0), m * b.channels(), y.channel_ptr(n, a.channels()));
  }
  return y;
}

/// Splits the gradient of concat_channels into the parts for a and b.
template <class S>
std::pair<Tensor<S>, Tensor<S>> concat_channels_backward(const Tensor<S>& dy, int a_channels) {
  const int b_channels = dy.channels() - a_channels;
  Tensor<S> da({dy.batch(), a_channels, dy.height(), dy.width()});
  Tensor<S> db({dy.batch(), b_channels, dy.height(), dy.width()});
  const std::size_t m = dy.plane();
  for (int n = 0; n < dy.batch(); ++n) {
    std::copy_n(dy.channel_ptr(n, 0), m * a_channels, da.channel_ptr(n, 0));
    std::copy_n(dy.channel_ptr(n, a_channels), m * b_channels, db.channel_ptr(n, 0));
  }
  return {std::move(da), std::move(db)};
}

template <class S>
Tensor<S> avgpool2(const Tensor<S>& x) {
  require(x.rank() == 4 && x.height() % 2 == 0 && x.width() % 2 == 0, ErrorCode::shape_error,
          "avgpool2 needs even spatial dimensions");
  Tensor<S> y({x.batch(), x.channels(), x.height() / 2, x.width() / 2});
  for (int n = 0; n < x.batch(); ++n)
    for (int c = 0; c < x.channels(); ++c)
      for (int yy = 0; yy < y.height(); ++yy)
        for (int xx = 0; xx < y.width(); ++xx)
          y.at(n, c, yy, xx) = S{0.25} * (x.at(n, c, 2 * yy, 2 * xx) + x.at(n, c, 2 * yy, 2 * xx + 1) +
                                          x.at(n, c, 2 * yy + 1, 2 * xx) + x.at(n, c, 2 * yy + 1, 2 * xx + 1));
  return y;
}

template <class S>
Tensor<S> avgpool2_backward(const Tensor<S>& dy) {
  Tensor<S> dx({dy.batch(), dy.channels(), dy.height() * 2, dy.width() * 2});
  for (int n = 0; n < dx.batch(); ++n)
    for (int c = 0; c < dx.channels(); ++c)
      for (int yy = 0; yy < dx.height(); ++yy)
        for (int xx = 0; xx < dx.width(); ++xx) dx.at(n, c, yy, xx) = S{0.25} * dy.at(n, c, yy / 2, xx / 2);
  return dx;
}

template <class S>
Tensor<S> upsample_nearest2(const Tensor<S>& x) {
  require(x.rank() == 4, ErrorCode::shape_error, "upsample_nearest2 input must be rank 4");
  Tensor<S> y({x.batch(), x.channels(), x.height() * 2, x.width() * 2});
  for (int n = 0; n < y.batch(); ++n)
    for (int c = 0; c < y.channels(); ++c)
      for (int yy = 0; yy < y.height(); ++yy)
        for (int xx = 0; xx < y.width(); ++xx) y.at(n, c, yy, xx) = x.at(n, c, yy / 2, xx / 2);
  return y;
}

template <class S>
Tensor<S> upsample_nearest2_backward(const Tensor<S>& dy) {
  Tensor<S> dx({dy.batch(), dy.channels(), dy.height() / 2, dy.width() / 2});
  for (int n = 0; n < dy.batch(); ++n)
    for (int c = 0; c < dy.channels(); ++c)
      for (int yy = 0; yy < dy.height(); ++yy)
        for (int xx = 0; xx < dy.width(); ++xx) dx.at(n, c, yy / 2, xx / 2) += dy.at(n, c, yy, xx);
  return dx;
}

/// Diffusion timestep embedding: sin(t * f_i) for the first half, cos(t * f_i) for the
/// second, with f_i = 10000^(-2i/dim).
template <class S>
Tensor<S> sinusoidal_embedding(int t, int dim) {
  require(t >= 0, ErrorCode::parameter_error, "timestep must be nonnegative");
  require(dim > 0 && dim % 2 == 0, ErrorCode::parameter_error, "embedding dimension must be even and positive");
  Tensor<S> e({1, dim});
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / dim);
    e[i] = static_cast<S>(std::sin(t * freq));
    e[half + i] = static_cast<S>(std::cos(t * freq));
  }
  return e;
}

}  // namespace udfsketch::nn
