#include "ccd/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

namespace ccd {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

int out_dim(int in, int k, const ConvGeom& g) {
  return (in + 2 * g.pad - g.dilation * (k - 1) - 1) / g.stride + 1;
}

void check_conv(const Tensor& x, const ConvWeights& w, const ConvGeom& g) {
  if (x.c != w.in) {
    throw Error("conv2d: input has " + std::to_string(x.c) + " channels, kernel expects " +
                std::to_string(w.in));
  }
  if (w.weight.size() != static_cast<std::size_t>(w.out) * w.in * w.k * w.k) {
    throw Error("conv2d: weight size does not match kernel shape");
  }
  if (!w.bias.empty() && w.bias.size() != static_cast<std::size_t>(w.out)) {
    throw Error("conv2d: bias size does not match output channels");
  }
  if (g.stride < 1 || g.dilation < 1 || g.pad < 0) throw Error("conv2d: invalid geometry");
  if (out_dim(x.h, w.k, g) < 1 || out_dim(x.w, w.k, g) < 1) {
    throw Error("conv2d: input too small for kernel");
  }
}

// Lowers output rows [oy0, oy1) of image n into a (C*k*k) x ((oy1-oy0)*wo)
// column block. Rows enumerate (input channel, ky, kx).
void im2col(const Tensor& x, int n, int k, const ConvGeom& g, int oy0, int oy1, int wo, RowMat& cols) {
  const long block = static_cast<long>(oy1 - oy0) * wo;
  cols.resize(static_cast<long>(x.c) * k * k, block);
  for (int ci = 0; ci < x.c; ++ci) {
    const double* src = x.channel(n, ci).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const long row = (static_cast<long>(ci) * k + ky) * k + kx;
        double* dst = cols.data() + row * block;
        for (int oy = oy0; oy < oy1; ++oy) {
          const int iy = oy * g.stride - g.pad + ky * g.dilation;
          double* out = dst + static_cast<long>(oy - oy0) * wo;
          if (iy < 0 || iy >= x.h) {
            std::fill(out, out + wo, 0.0);
            continue;
          }
          const double* in_row = src + static_cast<long>(iy) * x.w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx * g.dilation;
            out[ox] = (ix >= 0 && ix < x.w) ? in_row[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates a column block back into image n of dx.
void col2im(const RowMat& cols, int n, int k, const ConvGeom& g, int oy0, int oy1, int wo, Tensor& dx) {
  const long block = static_cast<long>(oy1 - oy0) * wo;
  for (int ci = 0; ci < dx.c; ++ci) {
    double* dst = dx.channel(n, ci).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const long row = (static_cast<long>(ci) * k + ky) * k + kx;
        const double* src = cols.data() + row * block;
        for (int oy = oy0; oy < oy1; ++oy) {
          const int iy = oy * g.stride - g.pad + ky * g.dilation;
          if (iy < 0 || iy >= dx.h) continue;
          double* out_row = dst + static_cast<long>(iy) * dx.w;
          const double* in = src + static_cast<long>(oy - oy0) * wo;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx * g.dilation;
            if (ix >= 0 && ix < dx.w) out_row[ix] += in[ox];
          }
        }
      }
    }
  }
}

using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// Channels x pixels view of output rows [oy0, oy1) of image n.
StridedMap block_view(Tensor& t, int n, int oy0, int oy1) {
  return StridedMap(t.channel(n, 0).data() + static_cast<long>(oy0) * t.w, t.c,
                    static_cast<long>(oy1 - oy0) * t.w, Eigen::OuterStride<>(t.plane()));
}

ConstStridedMap block_view(const Tensor& t, int n, int oy0, int oy1) {
  return ConstStridedMap(t.channel(n, 0).data() + static_cast<long>(oy0) * t.w, t.c,
                         static_cast<long>(oy1 - oy0) * t.w, Eigen::OuterStride<>(t.plane()));
}

// Output rows per GEMM block, sized so a column block stays cache resident.
int rows_per_block(int ho, int wo) {
  constexpr int kTargetColumns = 512;
  return std::clamp(kTargetColumns / std::max(wo, 1), 1, ho);
}

bool is_pointwise(int k, const ConvGeom& g) { return k == 1 && g.stride == 1 && g.pad == 0; }

}  // namespace

Tensor conv2d(const Tensor& x, const ConvWeights& w, ConvGeom geom) {
  check_conv(x, w, geom);
  const int ho = out_dim(x.h, w.k, geom);
  const int wo = out_dim(x.w, w.k, geom);
  const long K = static_cast<long>(w.in) * w.k * w.k;
  ConstMap kernel(w.weight.data(), w.out, K);
  Tensor out(x.n, w.out, ho, wo);
  if (is_pointwise(w.k, geom)) {
    for (int n = 0; n < x.n; ++n) block_view(out, n, 0, ho).noalias() = kernel * block_view(x, n, 0, x.h);
  } else {
    RowMat cols;
    const int step = rows_per_block(ho, wo);
    for (int n = 0; n < x.n; ++n) {
      for (int oy0 = 0; oy0 < ho; oy0 += step) {
        const int oy1 = std::min(ho, oy0 + step);
        im2col(x, n, w.k, geom, oy0, oy1, wo, cols);
        block_view(out, n, oy0, oy1).noalias() = kernel * cols;
      }
    }
  }
  if (!w.bias.empty()) {
    for (int n = 0; n < out.n; ++n) {
      for (int co = 0; co < w.out; ++co) {
        for (double& v : out.channel(n, co)) v += w.bias[co];
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor& x, const ConvWeights& w, ConvGeom geom, const Tensor& dy,
                     Tensor* dx, const ConvGrads& dw) {
  check_conv(x, w, geom);
  const int ho = out_dim(x.h, w.k, geom);
  const int wo = out_dim(x.w, w.k, geom);
  if (dy.n != x.n || dy.c != w.out || dy.h != ho || dy.w != wo) {
    throw Error("conv2d_backward: output gradient shape mismatch");
  }
  const long K = static_cast<long>(w.in) * w.k * w.k;
  ConstMap kernel(w.weight.data(), w.out, K);
  MutMap grad_kernel(dw.weight.data(), w.out, K);
  if (!dw.bias.empty()) {
    for (int n = 0; n < dy.n; ++n) {
      for (int co = 0; co < w.out; ++co) {
        for (double v : dy.channel(n, co)) dw.bias[co] += v;
      }
    }
  }
  if (dx != nullptr) *dx = Tensor(x.n, x.c, x.h, x.w);

  if (is_pointwise(w.k, geom)) {
    for (int n = 0; n < x.n; ++n) {
      auto g = block_view(dy, n, 0, ho);
      grad_kernel.noalias() += g * block_view(x, n, 0, x.h).transpose();
      if (dx != nullptr) block_view(*dx, n, 0, x.h).noalias() = kernel.transpose() * g;
    }
    return;
  }
  RowMat cols;
  RowMat dcols;
  const int step = rows_per_block(ho, wo);
  for (int n = 0; n < x.n; ++n) {
    for (int oy0 = 0; oy0 < ho; oy0 += step) {
      const int oy1 = std::min(ho, oy0 + step);
      auto g = block_view(dy, n, oy0, oy1);
      im2col(x, n, w.k, geom, oy0, oy1, wo, cols);
      grad_kernel.noalias() += g * cols.transpose();
      if (dx != nullptr) {
        dcols.noalias() = kernel.transpose() * g;
        col2im(dcols, n, w.k, geom, oy0, oy1, wo, *dx);
      }
    }
  }
}

Tensor batchnorm(const Tensor& x, const BatchNormWeights& w, Mode mode, BatchNormCache& cache) {
  if (x.c != w.channels || w.gamma.size() != static_cast<std::size_t>(x.c)) {
    throw Error("batchnorm: channel mismatch");
  }
  const std::size_t P = x.plane();
  const double count = static_cast<double>(x.n) * static_cast<double>(P);
  cache.mode = mode;
  cache.mean.assign(x.c, 0.0);
  cache.var.assign(x.c, 0.0);
  cache.inv_std.assign(x.c, 0.0);
  for (int c = 0; c < x.c; ++c) {
    double mean;
    double var;
    if (mode == Mode::train) {
      double s = 0.0;
      for (int n = 0; n < x.n; ++n) {
        for (double v : x.channel(n, c)) s += v;
      }
      mean = s / count;
      double q = 0.0;
      for (int n = 0; n < x.n; ++n) {
        for (double v : x.channel(n, c)) q += (v - mean) * (v - mean);
      }
      var = q / count;
    } else {
      mean = w.running_mean[c];
      var = w.running_var[c];
    }
    cache.mean[c] = mean;
    cache.var[c] = var;
    cache.inv_std[c] = 1.0 / std::sqrt(var + kBatchNormEps);
  }
  cache.xhat = Tensor(x.n, x.c, x.h, x.w);
  Tensor y(x.n, x.c, x.h, x.w);
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < x.c; ++c) {
      auto src = x.channel(n, c);
      auto xh = cache.xhat.channel(n, c);
      auto dst = y.channel(n, c);
      for (std::size_t i = 0; i < P; ++i) {
        xh[i] = (src[i] - cache.mean[c]) * cache.inv_std[c];
        dst[i] = w.gamma[c] * xh[i] + w.beta[c];
      }
    }
  }
  return y;
}

void batchnorm_backward(const BatchNormCache& cache, const BatchNormWeights& w,
                        const Tensor& dy, Tensor& dx, const BatchNormGrads& dw) {
  require_same_shape(cache.xhat, dy, "batchnorm_backward");
  const Tensor& xhat = cache.xhat;
  const std::size_t P = dy.plane();
  const double count = static_cast<double>(dy.n) * static_cast<double>(P);
  dx = Tensor(dy.n, dy.c, dy.h, dy.w);
  for (int c = 0; c < dy.c; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int n = 0; n < dy.n; ++n) {
      auto g = dy.channel(n, c);
      auto xh = xhat.channel(n, c);
      for (std::size_t i = 0; i < P; ++i) {
        sum_dy += g[i];
        sum_dy_xhat += g[i] * xh[i];
      }
    }
    dw.gamma[c] += sum_dy_xhat;
    dw.beta[c] += sum_dy;
    const double scale = w.gamma[c] * cache.inv_std[c];
    for (int n = 0; n < dy.n; ++n) {
      auto g = dy.channel(n, c);
      auto xh = xhat.channel(n, c);
      auto out = dx.channel(n, c);
      if (cache.mode == Mode::train) {
        for (std::size_t i = 0; i < P; ++i) {
          out[i] = scale * (g[i] - sum_dy / count - xh[i] * sum_dy_xhat / count);
        }
      } else {
        for (std::size_t i = 0; i < P; ++i) out[i] = scale * g[i];
      }
    }
  }
}

void update_running_stats(const BatchNormCache& cache, long count, MutSpan running_mean,
                          MutSpan running_var, double momentum) {
  const double correction = count > 1 ? static_cast<double>(count) / (count - 1) : 1.0;
  for (std::size_t c = 0; c < cache.mean.size(); ++c) {
    running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * cache.mean[c];
    running_var[c] = (1.0 - momentum) * running_var[c] + momentum * cache.var[c] * correction;
  }
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.v) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& y, const Tensor& dy) {
  require_same_shape(y, dy, "relu_backward");
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.v.size(); ++i) {
    if (y.v[i] <= 0.0) dx.v[i] = 0.0;
  }
  return dx;
}

Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.v) v = sigmoid(v);
  return y;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& dy) {
  require_same_shape(y, dy, "sigmoid_backward");
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= y.v[i] * (1.0 - y.v[i]);
  return dx;
}

std::vector<double> global_avg_pool(const Tensor& x) {
  std::vector<double> z(static_cast<std::size_t>(x.n) * x.c, 0.0);
  const double inv = 1.0 / static_cast<double>(x.plane());
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < x.c; ++c) {
      double s = 0.0;
      for (double v : x.channel(n, c)) s += v;
      z[static_cast<std::size_t>(n) * x.c + c] = s * inv;
    }
  }
  return z;
}

Tensor global_avg_pool_backward(const std::vector<double>& dz, int n, int c, int h, int w) {
  Tensor dx(n, c, h, w);
  const double inv = 1.0 / (static_cast<double>(h) * w);
  for (int in = 0; in < n; ++in) {
    for (int ic = 0; ic < c; ++ic) {
      const double g = dz[static_cast<std::size_t>(in) * c + ic] * inv;
      for (double& v : dx.channel(in, ic)) v = g;
    }
  }
  return dx;
}

Tensor upsample_nearest2(const Tensor& x) {
  Tensor y(x.n, x.c, 2 * x.h, 2 * x.w);
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < x.c; ++c) {
      for (int yy = 0; yy < y.h; ++yy) {
        for (int xx = 0; xx < y.w; ++xx) y.at(n, c, yy, xx) = x.at(n, c, yy / 2, xx / 2);
      }
    }
  }
  return y;
}

Tensor upsample_nearest2_backward(const Tensor& dy) {
  Tensor dx(dy.n, dy.c, dy.h / 2, dy.w / 2);
  for (int n = 0; n < dy.n; ++n) {
    for (int c = 0; c < dy.c; ++c) {
      for (int yy = 0; yy < dy.h; ++yy) {
        for (int xx = 0; xx < dy.w; ++xx) dx.at(n, c, yy / 2, xx / 2) += dy.at(n, c, yy, xx);
      }
    }
  }
  return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w) throw Error("concat_channels: shape mismatch");
  Tensor y(a.n, a.c + b.c, a.h, a.w);
  for (int n = 0; n < a.n; ++n) {
    for (int c = 0; c < a.c; ++c) {
      auto src = a.channel(n, c);
      std::copy(src.begin(), src.end(), y.channel(n, c).begin());
    }
    for (int c = 0; c < b.c; ++c) {
      auto src = b.channel(n, c);
      std::copy(src.begin(), src.end(), y.channel(n, a.c + c).begin());
    }
  }
  return y;
}

void split_channels(const Tensor& d, int first_channels, Tensor& da, Tensor& db) {
  da = Tensor(d.n, first_channels, d.h, d.w);
  db = Tensor(d.n, d.c - first_channels, d.h, d.w);
  for (int n = 0; n < d.n; ++n) {
    for (int c = 0; c < d.c; ++c) {
      auto src = d.channel(n, c);
      auto dst = c < first_channels ? da.channel(n, c) : db.channel(n, c - first_channels);
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }
}

std::vector<double> linear(std::span<const double> x, int n, const LinearWeights& w) {
  if (x.size() != static_cast<std::size_t>(n) * w.in) throw Error("linear: input size mismatch");
  std::vector<double> y(static_cast<std::size_t>(n) * w.out);
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < w.out; ++o) {
      double s = w.bias.empty() ? 0.0 : w.bias[o];
      for (int j = 0; j < w.in; ++j) {
        s += w.weight[static_cast<std::size_t>(o) * w.in + j] * x[static_cast<std::size_t>(i) * w.in + j];
      }
      y[static_cast<std::size_t>(i) * w.out + o] = s;
    }
  }
  return y;
}

std::vector<double> linear_backward(std::span<const double> x, int n, const LinearWeights& w,
                                    std::span<const double> dy, const LinearGrads& dw) {
  std::vector<double> dx(static_cast<std::size_t>(n) * w.in, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < w.out; ++o) {
      const double g = dy[static_cast<std::size_t>(i) * w.out + o];
      if (!dw.bias.empty()) dw.bias[o] += g;
      for (int j = 0; j < w.in; ++j) {
        const std::size_t wi = static_cast<std::size_t>(o) * w.in + j;
        dw.weight[wi] += g * x[static_cast<std::size_t>(i) * w.in + j];
        dx[static_cast<std::size_t>(i) * w.in + j] += g * w.weight[wi];
      }
    }
  }
  return dx;
}

}  // namespace ccd
