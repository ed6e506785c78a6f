#include "ccd/blocks.hpp"

#include <cmath>

namespace ccd {

namespace {

ConvWeights as_conv1x1(ConstSpan weight, ConstSpan bias, int out, int in) {
  return ConvWeights{weight, bias, out, in, 1};
}

ConvGrads as_conv1x1(MutSpan weight, MutSpan bias, int out, int in) {
  return ConvGrads{weight, bias, out, in, 1};
}

}  // namespace

Tensor residual_unit(const Tensor& x, const ResidualWeights& w, Mode mode, ResidualCache* cache) {
  if (x.c != w.conv1.in || w.conv2.out != x.c) throw Error("residual_unit: channel mismatch");
  ResidualCache local;
  ResidualCache& c = cache ? *cache : local;
  c.x = x;
  c.c1 = conv2d(x, w.conv1, same_geom(w.conv1.k));
  c.a1 = relu(batchnorm(c.c1, w.bn1, mode, c.bn1));
  c.c2 = conv2d(c.a1, w.conv2, same_geom(w.conv2.k));
  Tensor y = batchnorm(c.c2, w.bn2, mode, c.bn2);
  add_inplace(y, x);
  return y;
}

Tensor residual_unit_backward(const ResidualCache& cache, const ResidualWeights& w,
                              const Tensor& dy, const ResidualGrads& g) {
  Tensor d_c2;
  batchnorm_backward(cache.bn2, w.bn2, dy, d_c2, g.bn2);
  Tensor d_a1;
  conv2d_backward(cache.a1, w.conv2, same_geom(w.conv2.k), d_c2, &d_a1, g.conv2);
  Tensor d_bn1 = relu_backward(cache.a1, d_a1);
  Tensor d_c1;
  batchnorm_backward(cache.bn1, w.bn1, d_bn1, d_c1, g.bn1);
  Tensor dx;
  conv2d_backward(cache.x, w.conv1, same_geom(w.conv1.k), d_c1, &dx, g.conv1);
  add_inplace(dx, dy);
  return dx;
}

Tensor se_block(const Tensor& x, const SeWeights& w, SeCache* cache) {
  if (x.c != w.channels || w.w1.size() != static_cast<std::size_t>(w.reduced) * w.channels ||
      w.w2.size() != static_cast<std::size_t>(w.channels) * w.reduced) {
    throw Error("se_block: shape mismatch");
  }
  SeCache local;
  SeCache& c = cache ? *cache : local;
  const int C = w.channels;
  const int R = w.reduced;
  c.x = x;
  c.z = global_avg_pool(x);
  c.hidden.assign(static_cast<std::size_t>(x.n) * R, 0.0);
  c.scale.assign(static_cast<std::size_t>(x.n) * C, 0.0);
  for (int n = 0; n < x.n; ++n) {
    for (int r = 0; r < R; ++r) {
      double s = 0.0;
      for (int ch = 0; ch < C; ++ch) s += w.w1[r * C + ch] * c.z[n * C + ch];
      c.hidden[n * R + r] = s > 0.0 ? s : 0.0;
    }
    for (int ch = 0; ch < C; ++ch) {
      double s = 0.0;
      for (int r = 0; r < R; ++r) s += w.w2[ch * R + r] * c.hidden[n * R + r];
      c.scale[n * C + ch] = sigmoid(s);
    }
  }
  Tensor y = x;
  for (int n = 0; n < x.n; ++n) {
    for (int ch = 0; ch < C; ++ch) {
      const double s = c.scale[n * C + ch];
      for (double& v : y.channel(n, ch)) v *= s;
    }
  }
  return y;
}

Tensor se_block_backward(const SeCache& cache, const SeWeights& w, const Tensor& dy,
                         const SeGrads& g) {
  const Tensor& x = cache.x;
  require_same_shape(x, dy, "se_block_backward");
  const int C = w.channels;
  const int R = w.reduced;
  const double inv_p = 1.0 / static_cast<double>(x.plane());
  Tensor dx = dy;
  std::vector<double> d_pre_scale(C);
  std::vector<double> d_hidden(R);
  for (int n = 0; n < x.n; ++n) {
    for (int ch = 0; ch < C; ++ch) {
      const double s = cache.scale[n * C + ch];
      auto xs = x.channel(n, ch);
      auto gs = dy.channel(n, ch);
      double ds = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) ds += gs[i] * xs[i];
      d_pre_scale[ch] = ds * s * (1.0 - s);
      for (double& v : dx.channel(n, ch)) v *= s;
    }
    std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
    for (int ch = 0; ch < C; ++ch) {
      for (int r = 0; r < R; ++r) {
        g.w2[ch * R + r] += d_pre_scale[ch] * cache.hidden[n * R + r];
        d_hidden[r] += w.w2[ch * R + r] * d_pre_scale[ch];
      }
    }
    for (int r = 0; r < R; ++r) {
      if (cache.hidden[n * R + r] <= 0.0) continue;
      for (int ch = 0; ch < C; ++ch) {
        g.w1[r * C + ch] += d_hidden[r] * cache.z[n * C + ch];
        const double dz = w.w1[r * C + ch] * d_hidden[r] * inv_p;
        for (double& v : dx.channel(n, ch)) v += dz;
      }
    }
  }
  return dx;
}

Tensor aspp(const Tensor& x, const AsppWeights& w, const std::vector<int>& rates, AsppCache* cache) {
  if (rates.empty() || rates.size() != w.branches.size()) throw Error("aspp: rate/branch mismatch");
  Tensor sum;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (rates[i] < 1) throw Error("aspp: rates must be >= 1");
    Tensor b = conv2d(x, w.branches[i], same_geom(w.branches[i].k, rates[i]));
    if (i == 0) {
      sum = std::move(b);
    } else {
      add_inplace(sum, b);
    }
  }
  Tensor y = conv2d(sum, w.project, ConvGeom{});
  if (cache) {
    cache->x = x;
    cache->sum = std::move(sum);
  }
  return y;
}

Tensor aspp_backward(const AsppCache& cache, const AsppWeights& w, const std::vector<int>& rates,
                     const Tensor& dy, const AsppGrads& g) {
  Tensor d_sum;
  conv2d_backward(cache.sum, w.project, ConvGeom{}, dy, &d_sum, g.project);
  Tensor dx;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    Tensor d_branch;
    conv2d_backward(cache.x, w.branches[i], same_geom(w.branches[i].k, rates[i]), d_sum,
                    &d_branch, g.branches[i]);
    if (i == 0) {
      dx = std::move(d_branch);
    } else {
      add_inplace(dx, d_branch);
    }
  }
  return dx;
}

Tensor attention_gate(const Tensor& f, const AttentionWeights& w, AttentionCache* cache) {
  if (f.c != w.channels) throw Error("attention_gate: channel mismatch");
  Tensor hidden = conv2d(f, as_conv1x1(w.w1, w.b1, w.hidden, w.channels), ConvGeom{});
  for (double& v : hidden.v) v = std::tanh(v);
  Tensor gate = sigmoid(conv2d(hidden, as_conv1x1(w.w2, w.b2, 1, w.hidden), ConvGeom{}));
  Tensor y = f;
  for (int n = 0; n < f.n; ++n) {
    auto a = gate.channel(n, 0);
    for (int ch = 0; ch < f.c; ++ch) {
      auto dst = y.channel(n, ch);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= a[i];
    }
  }
  if (cache) {
    cache->f = f;
    cache->hidden = std::move(hidden);
    cache->gate = std::move(gate);
  }
  return y;
}

Tensor attention_gate_backward(const AttentionCache& cache, const AttentionWeights& w,
                               const Tensor& dy, const AttentionGrads& g) {
  const Tensor& f = cache.f;
  require_same_shape(f, dy, "attention_gate_backward");
  Tensor dx = dy;
  Tensor d_gate(f.n, 1, f.h, f.w);
  for (int n = 0; n < f.n; ++n) {
    auto a = cache.gate.channel(n, 0);
    auto da = d_gate.channel(n, 0);
    for (int ch = 0; ch < f.c; ++ch) {
      auto fs = f.channel(n, ch);
      auto gs = dy.channel(n, ch);
      auto out = dx.channel(n, ch);
      for (std::size_t i = 0; i < fs.size(); ++i) {
        da[i] += gs[i] * fs[i];
        out[i] = gs[i] * a[i];
      }
    }
  }
  Tensor d_pre_gate = sigmoid_backward(cache.gate, d_gate);
  Tensor d_hidden;
  conv2d_backward(cache.hidden, as_conv1x1(w.w2, w.b2, 1, w.hidden), ConvGeom{}, d_pre_gate,
                  &d_hidden, as_conv1x1(g.w2, g.b2, 1, w.hidden));
  for (std::size_t i = 0; i < d_hidden.v.size(); ++i) {
    const double t = cache.hidden.v[i];
    d_hidden.v[i] *= 1.0 - t * t;
  }
  Tensor d_f;
  conv2d_backward(f, as_conv1x1(w.w1, w.b1, w.hidden, w.channels), ConvGeom{}, d_hidden, &d_f,
                  as_conv1x1(g.w1, g.b1, w.hidden, w.channels));
  add_inplace(dx, d_f);
  return dx;
}

}  // namespace ccd
