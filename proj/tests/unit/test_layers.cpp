#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "ccd/blocks.hpp"
#include "ccd/random.hpp"

using namespace ccd;

namespace {

Tensor random_tensor(int n, int c, int h, int w, Rng& rng, double scale = 1.0) {
  Tensor t(n, c, h, w);
  for (double& v : t.v) v = scale * rng.normal();
  return t;
}

std::vector<double> random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Direct-loop convolution used as the reference.
Tensor conv_oracle(const Tensor& x, const std::vector<double>& w, const std::vector<double>& b, int out,
                   int k, ConvGeom g) {
  const int ho = (x.h + 2 * g.pad - g.dilation * (k - 1) - 1) / g.stride + 1;
  const int wo = (x.w + 2 * g.pad - g.dilation * (k - 1) - 1) / g.stride + 1;
  Tensor y(x.n, out, ho, wo);
  for (int n = 0; n < x.n; ++n)
    for (int co = 0; co < out; ++co)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          double s = b.empty() ? 0.0 : b[co];
          for (int ci = 0; ci < x.c; ++ci)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * g.stride - g.pad + ky * g.dilation;
                const int ix = ox * g.stride - g.pad + kx * g.dilation;
                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                s += w[((co * x.c + ci) * k + ky) * k + kx] * x.at(n, ci, iy, ix);
              }
          y.at(n, co, oy, ox) = s;
        }
  return y;
}

// Central-difference derivative of f at `values[i]`.
double numeric(std::vector<double>& values, std::size_t i, const std::function<double()>& f, double h = 1e-6) {
  const double saved = values[i];
  values[i] = saved + h;
  const double up = f();
  values[i] = saved - h;
  const double down = f();
  values[i] = saved;
  return (up - down) / (2.0 * h);
}

void expect_gradient(std::vector<double>& values, const std::vector<double>& analytic,
                     const std::function<double()>& f, const char* what) {
  ASSERT_EQ(values.size(), analytic.size()) << what;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double n = numeric(values, i, f);
    EXPECT_NEAR(analytic[i], n, 1e-6 * std::max(1.0, std::abs(n))) << what << "[" << i << "]";
  }
}

}  // namespace

TEST(Conv2d, MatchesDirectLoopsForAllGeometries) {
  Rng rng(1);
  for (ConvGeom g : {ConvGeom{1, 1, 1}, ConvGeom{2, 1, 1}, ConvGeom{1, 2, 2}, ConvGeom{1, 4, 4}, ConvGeom{1, 0, 1}}) {
    for (int k : {1, 3}) {
      if (k == 1 && g.pad > 0) continue;
      Tensor x = random_tensor(2, 3, 9, 7, rng);
      auto w = random_vec(static_cast<std::size_t>(4 * 3 * k * k), rng);
      auto b = random_vec(4, rng);
      const Tensor y = conv2d(x, ConvWeights{w, b, 4, 3, k}, g);
      const Tensor ref = conv_oracle(x, w, b, 4, k, g);
      ASSERT_TRUE(y.same_shape(ref));
      for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.v[i], ref.v[i], 1e-12);
    }
  }
}

TEST(Conv2d, LargeInputsSpanSeveralGemmBlocks) {
  Rng rng(2);
  Tensor x = random_tensor(2, 2, 40, 40, rng);
  auto w = random_vec(3 * 2 * 9, rng);
  const Tensor y = conv2d(x, ConvWeights{w, {}, 3, 2, 3}, same_geom(3));
  const Tensor ref = conv_oracle(x, w, {}, 3, 3, same_geom(3));
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.v[i], ref.v[i], 1e-12);
}

TEST(Conv2d, DilatedImpulseResponse) {
  Tensor x(1, 1, 7, 7);
  x.at(0, 0, 3, 3) = 1.0;
  std::vector<double> w(9, 1.0);
  const Tensor y = conv2d(x, ConvWeights{w, {}, 1, 1, 3}, same_geom(3, 2));
  for (int r = 0; r < 7; ++r) {
    for (int c = 0; c < 7; ++c) {
      const bool on = (r == 1 || r == 3 || r == 5) && (c == 1 || c == 3 || c == 5);
      EXPECT_EQ(y.at(0, 0, r, c), on ? 1.0 : 0.0) << r << "," << c;
    }
  }
}

TEST(Conv2d, BackwardMatchesFiniteDifferences) {
  Rng rng(3);
  for (ConvGeom g : {ConvGeom{1, 1, 1}, ConvGeom{2, 1, 1}, ConvGeom{1, 2, 2}}) {
    Tensor x = random_tensor(2, 2, 6, 6, rng);
    auto w = random_vec(3 * 2 * 9, rng);
    auto b = random_vec(3, rng);
    const Tensor y0 = conv2d(x, ConvWeights{w, b, 3, 2, 3}, g);
    const auto r = random_vec(y0.size(), rng);
    auto loss = [&] { return dot(conv2d(x, ConvWeights{w, b, 3, 2, 3}, g).v, r); };
    Tensor dy(y0.n, y0.c, y0.h, y0.w);
    dy.v = r;
    std::vector<double> gw(w.size(), 0.0), gb(b.size(), 0.0);
    Tensor dx;
    conv2d_backward(x, ConvWeights{w, b, 3, 2, 3}, g, dy, &dx, ConvGrads{gw, gb, 3, 2, 3});
    expect_gradient(x.v, dx.v, loss, "conv dx");
    expect_gradient(w, gw, loss, "conv dw");
    expect_gradient(b, gb, loss, "conv db");
  }
}

TEST(BatchNorm, TrainModeNormalisesPerChannel) {
  Rng rng(4);
  Tensor x = random_tensor(3, 2, 4, 5, rng, 2.0);
  std::vector<double> gamma{1.0, 1.0}, beta{0.0, 0.0}, rm{0.0, 0.0}, rv{1.0, 1.0};
  BatchNormCache cache;
  const Tensor y = batchnorm(x, BatchNormWeights{gamma, beta, rm, rv, 2}, Mode::train, cache);
  for (int c = 0; c < 2; ++c) {
    double s = 0.0, q = 0.0;
    for (int n = 0; n < 3; ++n)
      for (double v : y.channel(n, c)) s += v, q += v * v;
    EXPECT_NEAR(s / 60.0, 0.0, 1e-12);
    EXPECT_NEAR(q / 60.0, 1.0, 1e-4);
  }
}

TEST(BatchNorm, EvalModeUsesRunningStatistics) {
  Tensor x(1, 1, 1, 2);
  x.v = {1.0, 3.0};
  std::vector<double> gamma{2.0}, beta{0.5}, rm{1.0}, rv{4.0};
  BatchNormCache cache;
  const Tensor y = batchnorm(x, BatchNormWeights{gamma, beta, rm, rv, 1}, Mode::eval, cache);
  EXPECT_NEAR(y.v[0], 0.5, 1e-12);
  EXPECT_NEAR(y.v[1], 2.0 * 2.0 / std::sqrt(4.0 + kBatchNormEps) + 0.5, 1e-12);
}

TEST(BatchNorm, RunningStatisticsUseUnbiasedVariance) {
  Tensor x(1, 1, 1, 4);
  x.v = {1.0, 2.0, 3.0, 4.0};
  std::vector<double> gamma{1.0}, beta{0.0}, rm{0.0}, rv{1.0};
  BatchNormCache cache;
  batchnorm(x, BatchNormWeights{gamma, beta, rm, rv, 1}, Mode::train, cache);
  update_running_stats(cache, 4, rm, rv);
  EXPECT_NEAR(rm[0], 0.1 * 2.5, 1e-12);
  EXPECT_NEAR(rv[0], 0.9 * 1.0 + 0.1 * (5.0 / 3.0), 1e-12);
}

TEST(BatchNorm, BackwardMatchesFiniteDifferences) {
  Rng rng(5);
  for (Mode mode : {Mode::train, Mode::eval}) {
    Tensor x = random_tensor(2, 3, 3, 3, rng);
    auto gamma = random_vec(3, rng), beta = random_vec(3, rng);
    std::vector<double> rm{0.1, -0.2, 0.3}, rv{1.5, 0.7, 2.0};
    BatchNormCache cache;
    const Tensor y0 = batchnorm(x, BatchNormWeights{gamma, beta, rm, rv, 3}, mode, cache);
    const auto r = random_vec(y0.size(), rng);
    auto loss = [&] {
      BatchNormCache c;
      return dot(batchnorm(x, BatchNormWeights{gamma, beta, rm, rv, 3}, mode, c).v, r);
    };
    Tensor dy = y0;
    dy.v = r;
    Tensor dx;
    std::vector<double> gg(3, 0.0), gb(3, 0.0);
    batchnorm_backward(cache, BatchNormWeights{gamma, beta, rm, rv, 3}, dy, dx, BatchNormGrads{gg, gb, {}, {}, 3});
    expect_gradient(x.v, dx.v, loss, "bn dx");
    expect_gradient(gamma, gg, loss, "bn dgamma");
    expect_gradient(beta, gb, loss, "bn dbeta");
  }
}

TEST(Activations, SigmoidValuesAndStability) {
  EXPECT_NEAR(sigmoid(4.0), 0.9820137900379085, 1e-15);
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_GT(sigmoid(-800.0), -1e-300);
  EXPECT_LE(sigmoid(800.0), 1.0);
  EXPECT_TRUE(std::isfinite(sigmoid(-800.0)));
}

TEST(SeBlock, ZeroWeightsHalveTheInput) {
  Rng rng(6);
  Tensor x = random_tensor(2, 4, 3, 3, rng);
  std::vector<double> w1(4, 0.0), w2(4, 0.0);
  const Tensor y = se_block(x, SeWeights{w1, w2, 4, 1});
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y.v[i], 0.5 * x.v[i]);
}

TEST(SeBlock, ScalarExample) {
  Tensor x(1, 1, 1, 2);
  x.v = {1.0, 3.0};
  std::vector<double> w1{2.0}, w2{1.0};
  SeCache cache;
  const Tensor y = se_block(x, SeWeights{w1, w2, 1, 1}, &cache);
  EXPECT_NEAR(cache.z[0], 2.0, 1e-15);
  EXPECT_NEAR(cache.scale[0], 0.98201379, 1e-8);
  EXPECT_NEAR(y.v[0], 0.98201379, 1e-8);
  EXPECT_NEAR(y.v[1], 2.94604137, 1e-8);
}

TEST(SeBlock, BackwardMatchesFiniteDifferences) {
  Rng rng(7);
  Tensor x = random_tensor(2, 4, 3, 3, rng);
  auto w1 = random_vec(4, rng), w2 = random_vec(4, rng);
  SeCache cache;
  const Tensor y0 = se_block(x, SeWeights{w1, w2, 4, 1}, &cache);
  const auto r = random_vec(y0.size(), rng);
  auto loss = [&] { return dot(se_block(x, SeWeights{w1, w2, 4, 1}).v, r); };
  Tensor dy = y0;
  dy.v = r;
  std::vector<double> g1(4, 0.0), g2(4, 0.0);
  const Tensor dx = se_block_backward(cache, SeWeights{w1, w2, 4, 1}, dy, SeGrads{g1, g2, 4, 1});
  expect_gradient(x.v, dx.v, loss, "se dx");
  expect_gradient(w1, g1, loss, "se dw1");
  expect_gradient(w2, g2, loss, "se dw2");
}

TEST(Attention, ZeroWeightsHalveAndLargeBiasPassesThrough) {
  Rng rng(8);
  Tensor f = random_tensor(1, 4, 3, 3, rng);
  std::vector<double> w1(4, 0.0), b1(1, 0.0), w2(1, 0.0), b2(1, 0.0);
  Tensor y = attention_gate(f, AttentionWeights{w1, b1, w2, b2, 4, 1});
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_DOUBLE_EQ(y.v[i], 0.5 * f.v[i]);
  b2[0] = 40.0;
  y = attention_gate(f, AttentionWeights{w1, b1, w2, b2, 4, 1});
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(y.v[i], f.v[i], 1e-12);
}

TEST(Attention, ScalarExample) {
  Tensor f(1, 1, 1, 1, 1.0);
  std::vector<double> w1{1.0}, b1{0.0}, w2{2.0}, b2{0.0};
  const Tensor y = attention_gate(f, AttentionWeights{w1, b1, w2, b2, 1, 1});
  const double expected = 1.0 / (1.0 + std::exp(-2.0 * std::tanh(1.0)));
  EXPECT_NEAR(y.v[0], expected, 1e-15);
  EXPECT_NEAR(y.v[0], 0.82101, 1e-5);
}

TEST(Attention, BackwardMatchesFiniteDifferences) {
  Rng rng(9);
  Tensor f = random_tensor(2, 4, 3, 3, rng);
  auto w1 = random_vec(4, rng), b1 = random_vec(1, rng), w2 = random_vec(1, rng), b2 = random_vec(1, rng);
  AttentionCache cache;
  const Tensor y0 = attention_gate(f, AttentionWeights{w1, b1, w2, b2, 4, 1}, &cache);
  const auto r = random_vec(y0.size(), rng);
  auto loss = [&] { return dot(attention_gate(f, AttentionWeights{w1, b1, w2, b2, 4, 1}).v, r); };
  Tensor dy = y0;
  dy.v = r;
  std::vector<double> g1(4, 0.0), gb1(1, 0.0), g2(1, 0.0), gb2(1, 0.0);
  const Tensor df = attention_gate_backward(cache, AttentionWeights{w1, b1, w2, b2, 4, 1}, dy,
                                            AttentionGrads{g1, gb1, g2, gb2, 4, 1});
  expect_gradient(f.v, df.v, loss, "att df");
  expect_gradient(w1, g1, loss, "att dw1");
  expect_gradient(b1, gb1, loss, "att db1");
  expect_gradient(w2, g2, loss, "att dw2");
  expect_gradient(b2, gb2, loss, "att db2");
}

TEST(Aspp, ZeroBranchesGiveTheProjectedBias) {
  Rng rng(10);
  Tensor x = random_tensor(1, 2, 4, 4, rng);
  std::vector<double> bw(2 * 2 * 9, 0.0), bb{0.5, -1.0}, pw{1.0, 2.0, 3.0, 4.0}, pb{0.25, 0.0};
  AsppWeights w{{ConvWeights{bw, bb, 2, 2, 3}}, ConvWeights{pw, pb, 2, 2, 1}};
  const Tensor y = aspp(x, w, {1});
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      EXPECT_NEAR(y.at(0, 0, r, c), 1.0 * 0.5 + 2.0 * -1.0 + 0.25, 1e-12);
      EXPECT_NEAR(y.at(0, 1, r, c), 3.0 * 0.5 + 4.0 * -1.0, 1e-12);
    }
  }
}

TEST(Aspp, SingleRateWithIdentityProjectionIsAPlainConv) {
  Rng rng(11);
  Tensor x = random_tensor(1, 2, 5, 5, rng);
  auto bw = random_vec(2 * 2 * 9, rng), bb = random_vec(2, rng);
  std::vector<double> pw{1.0, 0.0, 0.0, 1.0}, pb{0.0, 0.0};
  const Tensor y = aspp(x, AsppWeights{{ConvWeights{bw, bb, 2, 2, 3}}, ConvWeights{pw, pb, 2, 2, 1}}, {1});
  const Tensor ref = conv_oracle(x, bw, bb, 2, 3, same_geom(3));
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.v[i], ref.v[i], 1e-12);
}

TEST(Aspp, BackwardMatchesFiniteDifferences) {
  Rng rng(12);
  Tensor x = random_tensor(1, 2, 5, 5, rng);
  auto w1 = random_vec(2 * 2 * 9, rng), b1 = random_vec(2, rng);
  auto w2 = random_vec(2 * 2 * 9, rng), b2 = random_vec(2, rng);
  auto pw = random_vec(4, rng), pb = random_vec(2, rng);
  const std::vector<int> rates{1, 2};
  auto weights = [&] {
    return AsppWeights{{ConvWeights{w1, b1, 2, 2, 3}, ConvWeights{w2, b2, 2, 2, 3}}, ConvWeights{pw, pb, 2, 2, 1}};
  };
  AsppCache cache;
  const Tensor y0 = aspp(x, weights(), rates, &cache);
  const auto r = random_vec(y0.size(), rng);
  auto loss = [&] { return dot(aspp(x, weights(), rates).v, r); };
  Tensor dy = y0;
  dy.v = r;
  std::vector<double> g1(w1.size(), 0.0), gb1(2, 0.0), g2(w2.size(), 0.0), gb2(2, 0.0), gp(4, 0.0), gpb(2, 0.0);
  AsppGrads grads{{ConvGrads{g1, gb1, 2, 2, 3}, ConvGrads{g2, gb2, 2, 2, 3}}, ConvGrads{gp, gpb, 2, 2, 1}};
  const Tensor dx = aspp_backward(cache, weights(), rates, dy, grads);
  expect_gradient(x.v, dx.v, loss, "aspp dx");
  expect_gradient(w2, g2, loss, "aspp dw rate 2");
  expect_gradient(pw, gp, loss, "aspp dproject");
  expect_gradient(b1, gb1, loss, "aspp db rate 1");
}

namespace {

struct ResidualParams {
  std::vector<double> c1, g1, be1, rm1, rv1, c2, g2, be2, rm2, rv2;
  ResidualWeights view() const {
    return {ConvWeights{c1, {}, 2, 2, 3}, BatchNormWeights{g1, be1, rm1, rv1, 2},
            ConvWeights{c2, {}, 2, 2, 3}, BatchNormWeights{g2, be2, rm2, rv2, 2}};
  }
};

ResidualParams random_residual(Rng& rng) {
  return {random_vec(36, rng, 0.5), {1.2, 0.8}, {0.1, -0.1}, {0.0, 0.1}, {1.0, 2.0},
          random_vec(36, rng, 0.5), {0.9, 1.1}, {0.0, 0.2}, {0.2, 0.0}, {1.5, 1.0}};
}

}  // namespace

TEST(ResidualUnit, ZeroBranchIsIdentity) {
  Rng rng(13);
  Tensor x = random_tensor(2, 2, 4, 4, rng);
  ResidualParams p = random_residual(rng);
  p.g2 = {0.0, 0.0};
  p.be2 = {0.0, 0.0};
  for (Mode mode : {Mode::train, Mode::eval}) {
    const Tensor y = residual_unit(x, p.view(), mode);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y.v[i], x.v[i], 1e-15);
  }
}

TEST(ResidualUnit, MatchesStraightLineComposition) {
  Rng rng(14);
  Tensor x = random_tensor(2, 2, 4, 4, rng, 0.1);
  const ResidualParams p = random_residual(rng);
  const auto w = p.view();
  for (Mode mode : {Mode::train, Mode::eval}) {
    BatchNormCache c1, c2;
    const Tensor a = relu(batchnorm(conv2d(x, w.conv1, same_geom(3)), w.bn1, mode, c1));
    Tensor ref = batchnorm(conv2d(a, w.conv2, same_geom(3)), w.bn2, mode, c2);
    add_inplace(ref, x);
    const Tensor y = residual_unit(x, w, mode);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.v[i], ref.v[i], 1e-12);
  }
}

TEST(Linear, BackwardMatchesFiniteDifferences) {
  Rng rng(15);
  auto x = random_vec(2 * 4, rng), w = random_vec(3 * 4, rng), b = random_vec(3, rng);
  const auto r = random_vec(2 * 3, rng);
  auto loss = [&] { return dot(linear(x, 2, LinearWeights{w, b, 3, 4}), r); };
  std::vector<double> gw(w.size(), 0.0), gb(3, 0.0);
  const auto dx = linear_backward(x, 2, LinearWeights{w, b, 3, 4}, r, LinearGrads{gw, gb, 3, 4});
  expect_gradient(x, dx, loss, "linear dx");
  expect_gradient(w, gw, loss, "linear dw");
  expect_gradient(b, gb, loss, "linear db");
}

TEST(Resampling, UpsampleAndPoolAdjoints) {
  Rng rng(16);
  Tensor x = random_tensor(2, 3, 2, 3, rng);
  const Tensor up = upsample_nearest2(x);
  ASSERT_EQ(up.h, 4);
  ASSERT_EQ(up.w, 6);
  EXPECT_EQ(up.at(1, 2, 3, 5), x.at(1, 2, 1, 2));
  Tensor dy = random_tensor(2, 3, 4, 6, rng);
  const Tensor dx = upsample_nearest2_backward(dy);
  EXPECT_NEAR(dot(up.v, dy.v), dot(x.v, dx.v), 1e-12);

  const auto z = global_avg_pool(x);
  const auto dz = random_vec(z.size(), rng);
  const Tensor gx = global_avg_pool_backward(dz, 2, 3, 2, 3);
  EXPECT_NEAR(dot(z, dz), dot(x.v, gx.v), 1e-12);
}

TEST(Channels, ConcatAndSplitRoundTrip) {
  Rng rng(17);
  Tensor a = random_tensor(2, 2, 3, 3, rng), b = random_tensor(2, 3, 3, 3, rng);
  const Tensor cat = concat_channels(a, b);
  Tensor da, db;
  split_channels(cat, 2, da, db);
  EXPECT_EQ(da, a);
  EXPECT_EQ(db, b);
}
