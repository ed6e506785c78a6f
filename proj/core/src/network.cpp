#include "ccd/network.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "ccd/random.hpp"

namespace ccd {

void NetConfig::validate() const {
  if (levels < 1) throw Error("NetConfig: levels must be >= 1");
  if (base_channels < 1) throw Error("NetConfig: base_channels must be >= 1");
  if (num_classes < 1) throw Error("NetConfig: num_classes must be >= 1");
  if (aspp_rates.empty()) throw Error("NetConfig: aspp_rates must be non-empty");
  for (int r : aspp_rates) {
    if (r < 1) throw Error("NetConfig: aspp rates must be >= 1");
  }
  if (height < 1 || width < 1) throw Error("NetConfig: input size must be positive");
  const int step = 1 << levels;
  if (height % step != 0 || width % step != 0) {
    throw Error("NetConfig: input " + std::to_string(height) + "x" + std::to_string(width) +
                " not divisible by 2^levels = " + std::to_string(step));
  }
}

namespace {

int reduced(int channels) { return std::max(1, channels / kReduction); }

std::size_t product(const std::vector<int>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

// Parameter storage order. `bind_view` below must use the same names.
template <class Visitor>
void visit_layout(const NetConfig& cfg, Visitor&& v) {
  const int c0 = cfg.channels(0);
  v.conv("stem.conv", c0, 1, 3, false);
  v.bn("stem.bn", c0);
  for (int i = 0; i < cfg.levels; ++i) {
    const std::string p = "enc" + std::to_string(i);
    const int c = cfg.channels(i);
    v.residual(p + ".res", c);
    v.se(p + ".se", c, reduced(c));
    v.conv(p + ".down", cfg.channels(i + 1), c, 3, true);
  }
  const int cb = cfg.channels(cfg.levels);
  for (std::size_t k = 0; k < cfg.aspp_rates.size(); ++k) {
    v.conv("aspp.branch" + std::to_string(k), cb, cb, 3, true);
  }
  v.conv("aspp.project", cb, cb, 1, true);
  v.linear("classifier", cfg.num_classes, cb);
  for (int i = cfg.levels - 1; i >= 0; --i) {
    const std::string p = "dec" + std::to_string(i);
    const int deep = cfg.channels(i + 1);
    const int c = cfg.channels(i);
    v.attention(p + ".att", deep, reduced(deep));
    v.conv(p + ".fuse", c, deep + c, 1, true);
    v.residual(p + ".res", c);
  }
  v.conv("out", 1, c0, 1, true);
}

struct LayoutBuilder {
  std::function<void(std::string, std::vector<int>)> param;
  std::function<void(std::string, std::vector<int>)> buffer;

  void conv(const std::string& name, int out, int in, int k, bool bias) {
    param(name + ".weight", {out, in, k, k});
    if (bias) param(name + ".bias", {out});
  }
  void bn(const std::string& name, int c) {
    param(name + ".gamma", {c});
    param(name + ".beta", {c});
    buffer(name + ".running_mean", {c});
    buffer(name + ".running_var", {c});
  }
  void residual(const std::string& name, int c) {
    conv(name + ".conv1", c, c, 3, false);
    bn(name + ".bn1", c);
    conv(name + ".conv2", c, c, 3, false);
    bn(name + ".bn2", c);
  }
  void se(const std::string& name, int c, int r) {
    param(name + ".w1", {r, c});
    param(name + ".w2", {c, r});
  }
  void attention(const std::string& name, int c, int m) {
    param(name + ".w1", {m, c});
    param(name + ".b1", {m});
    param(name + ".w2", {m});
    param(name + ".b2", {1});
  }
  void linear(const std::string& name, int out, int in) {
    param(name + ".weight", {out, in});
    param(name + ".bias", {out});
  }
};

template <class S, class Vec>
S slice(Vec& values, const ParamSpec& spec) {
  return S(values.data() + spec.offset, spec.size);
}

template <class S, class Vec>
NetView<S> bind_view(const NetConfig& cfg, const ParamLayout& layout, Vec& values, Vec* buffers) {
  auto p = [&](const std::string& name) { return slice<S>(values, layout.param(name)); };
  auto b = [&](const std::string& name) {
    return buffers ? slice<S>(*buffers, layout.buffer(name)) : S{};
  };
  auto conv = [&](const std::string& name, int out, int in, int k, bool bias) {
    return ConvView<S>{p(name + ".weight"), bias ? p(name + ".bias") : S{}, out, in, k};
  };
  auto bn = [&](const std::string& name, int c) {
    return BatchNormView<S>{p(name + ".gamma"), p(name + ".beta"), b(name + ".running_mean"),
                            b(name + ".running_var"), c};
  };
  auto residual = [&](const std::string& name, int c) {
    return ResidualView<S>{conv(name + ".conv1", c, c, 3, false), bn(name + ".bn1", c),
                           conv(name + ".conv2", c, c, 3, false), bn(name + ".bn2", c)};
  };

  NetView<S> view;
  const int c0 = cfg.channels(0);
  view.stem_conv = conv("stem.conv", c0, 1, 3, false);
  view.stem_bn = bn("stem.bn", c0);
  view.encoders.resize(cfg.levels);
  view.decoders.resize(cfg.levels);
  for (int i = 0; i < cfg.levels; ++i) {
    const std::string e = "enc" + std::to_string(i);
    const int c = cfg.channels(i);
    auto& enc = view.encoders[i];
    enc.res = residual(e + ".res", c);
    enc.se = SeView<S>{p(e + ".se.w1"), p(e + ".se.w2"), c, reduced(c)};
    enc.down = conv(e + ".down", cfg.channels(i + 1), c, 3, true);

    const std::string d = "dec" + std::to_string(i);
    const int deep = cfg.channels(i + 1);
    auto& dec = view.decoders[i];
    dec.att = AttentionView<S>{p(d + ".att.w1"), p(d + ".att.b1"), p(d + ".att.w2"),
                               p(d + ".att.b2"), deep, reduced(deep)};
    dec.fuse = conv(d + ".fuse", c, deep + c, 1, true);
    dec.res = residual(d + ".res", c);
  }
  const int cb = cfg.channels(cfg.levels);
  for (std::size_t k = 0; k < cfg.aspp_rates.size(); ++k) {
    view.aspp.branches.push_back(conv("aspp.branch" + std::to_string(k), cb, cb, 3, true));
  }
  view.aspp.project = conv("aspp.project", cb, cb, 1, true);
  view.classifier = LinearView<S>{p("classifier.weight"), p("classifier.bias"), cfg.num_classes, cb};
  view.out = conv("out", 1, c0, 1, true);
  return view;
}

}  // namespace

ParamLayout::ParamLayout(const NetConfig& config) {
  config.validate();
  LayoutBuilder builder{
      [this](std::string name, std::vector<int> shape) { add_param(std::move(name), std::move(shape)); },
      [this](std::string name, std::vector<int> shape) { add_buffer(std::move(name), std::move(shape)); }};
  visit_layout(config, builder);
}

void ParamLayout::add_param(std::string name, std::vector<int> shape) {
  const std::size_t size = product(shape);
  param_index_[name] = params_.size();
  params_.push_back({std::move(name), std::move(shape), param_count_, size});
  param_count_ += size;
}

void ParamLayout::add_buffer(std::string name, std::vector<int> shape) {
  const std::size_t size = product(shape);
  buffer_index_[name] = buffers_.size();
  buffers_.push_back({std::move(name), std::move(shape), buffer_count_, size});
  buffer_count_ += size;
}

const ParamSpec& ParamLayout::param(const std::string& name) const {
  auto it = param_index_.find(name);
  if (it == param_index_.end()) throw Error("unknown parameter " + name);
  return params_[it->second];
}

const ParamSpec& ParamLayout::buffer(const std::string& name) const {
  auto it = buffer_index_.find(name);
  if (it == buffer_index_.end()) throw Error("unknown buffer " + name);
  return buffers_[it->second];
}

NetWeights ModelParams::weights() const {
  ParamLayout layout(config);
  if (values.size() != layout.param_count() || buffers.size() != layout.buffer_count()) {
    throw Error("ModelParams: storage does not match config");
  }
  return bind_view<ConstSpan>(config, layout, values, &buffers);
}

NetGrads ModelParams::grads(std::vector<double>& gradient) const {
  ParamLayout layout(config);
  if (gradient.size() != layout.param_count()) throw Error("gradient size does not match params");
  return bind_view<MutSpan, std::vector<double>>(config, layout, gradient, nullptr);
}

ModelParams init_params(const NetConfig& config, std::uint64_t seed) {
  ParamLayout layout(config);
  ModelParams params{config, std::vector<double>(layout.param_count(), 0.0),
                     std::vector<double>(layout.buffer_count(), 0.0)};
  Rng rng(seed);
  auto ends_with = [](const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  for (const auto& spec : layout.params()) {
    auto* dst = params.values.data() + spec.offset;
    if (ends_with(spec.name, ".gamma")) {
      std::fill(dst, dst + spec.size, 1.0);
    } else if (ends_with(spec.name, ".beta") || ends_with(spec.name, ".bias") ||
               ends_with(spec.name, ".b1") || ends_with(spec.name, ".b2")) {
      // zero
    } else {
      // Fan-in scaled normal: He gain for 3x3 convolutions feeding ReLUs,
      // unit gain for 1x1 projections, gates and the classifier.
      const std::size_t fan_in = spec.shape.size() == 1 ? 1 : spec.size / spec.shape[0];
      const bool spatial = spec.shape.size() == 4 && spec.shape[2] > 1;
      const double stddev = std::sqrt((spatial ? 2.0 : 1.0) / static_cast<double>(fan_in));
      for (std::size_t i = 0; i < spec.size; ++i) dst[i] = rng.normal(0.0, stddev);
    }
  }
  for (const auto& spec : layout.buffers()) {
    if (ends_with(spec.name, ".running_var")) {
      std::fill(params.buffers.begin() + static_cast<std::ptrdiff_t>(spec.offset),
                params.buffers.begin() + static_cast<std::ptrdiff_t>(spec.offset + spec.size), 1.0);
    }
  }
  return params;
}

ImageTensor ForwardOutput::image(int index) const {
  auto plane = denoised.channel(index, 0);
  return ImageTensor(denoised.h, denoised.w, std::vector<double>(plane.begin(), plane.end()));
}

std::vector<double> ForwardOutput::logits_of(int index) const {
  auto first = logits.begin() + static_cast<std::ptrdiff_t>(index) * num_classes;
  return {first, first + num_classes};
}

Tensor to_batch(const std::vector<ImageTensor>& images) {
  if (images.empty()) throw Error("to_batch: no images");
  const int h = images.front().height();
  const int w = images.front().width();
  Tensor t(static_cast<int>(images.size()), 1, h, w);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].height() != h || images[i].width() != w) throw Error("to_batch: shape mismatch");
    auto src = images[i].data();
    std::copy(src.begin(), src.end(), t.channel(static_cast<int>(i), 0).begin());
  }
  return t;
}

ForwardOutput forward(const ModelParams& params, const Tensor& input, Mode mode) {
  const NetConfig& cfg = params.config;
  if (input.c != 1 || input.h != cfg.height || input.w != cfg.width || input.n < 1) {
    throw Error("forward: shape mismatch, model expects " + std::to_string(cfg.height) + "x" +
                std::to_string(cfg.width) + " single-channel input");
  }
  const NetWeights w = params.weights();
  const int L = cfg.levels;

  ForwardOutput out;
  out.num_classes = cfg.num_classes;
  ForwardCache& c = out.cache;
  c.mode = mode;
  c.input = input;
  c.stem_pre = conv2d(input, w.stem_conv, same_geom(3));
  c.stem_out = relu(batchnorm(c.stem_pre, w.stem_bn, mode, c.stem_bn));

  c.enc_res.resize(L);
  c.enc_se.resize(L);
  c.skips.resize(L);
  c.enc_out.resize(L);
  const Tensor* x = &c.stem_out;
  for (int i = 0; i < L; ++i) {
    const auto& enc = w.encoders[i];
    Tensor r = residual_unit(*x, enc.res, mode, &c.enc_res[i]);
    c.skips[i] = se_block(r, enc.se, &c.enc_se[i]);
    c.enc_out[i] = conv2d(c.skips[i], enc.down, ConvGeom{2, 1, 1});
    x = &c.enc_out[i];
  }

  c.bottleneck = aspp(*x, w.aspp, cfg.aspp_rates, &c.aspp);
  c.pooled = global_avg_pool(c.bottleneck);
  out.logits = linear(c.pooled, input.n, w.classifier);

  c.dec_att.resize(L);
  c.dec_cat.resize(L);
  c.dec_res.resize(L);
  Tensor d = c.bottleneck;
  for (int i = L - 1; i >= 0; --i) {
    const auto& dec = w.decoders[i];
    Tensor gated = attention_gate(d, dec.att, &c.dec_att[i]);
    c.dec_cat[i] = concat_channels(upsample_nearest2(gated), c.skips[i]);
    Tensor fused = conv2d(c.dec_cat[i], dec.fuse, ConvGeom{});
    d = residual_unit(fused, dec.res, mode, &c.dec_res[i]);
  }
  c.final_features = std::move(d);
  c.denoised = sigmoid(conv2d(c.final_features, w.out, ConvGeom{}));
  out.denoised = c.denoised;
  return out;
}

ForwardOutput forward(const ModelParams& params, const ImageTensor& img, Mode mode) {
  return forward(params, to_batch({img}), mode);
}

void commit_batch_statistics(ModelParams& params, const ForwardCache& cache) {
  if (cache.mode != Mode::train) return;
  ParamLayout layout(params.config);
  auto commit = [&](const std::string& name, const BatchNormCache& bn, const Tensor& pre) {
    auto& mean = layout.buffer(name + ".running_mean");
    auto& var = layout.buffer(name + ".running_var");
    update_running_stats(bn, static_cast<long>(pre.n) * static_cast<long>(pre.plane()),
                         MutSpan(params.buffers.data() + mean.offset, mean.size),
                         MutSpan(params.buffers.data() + var.offset, var.size));
  };
  commit("stem.bn", cache.stem_bn, cache.stem_pre);
  for (int i = 0; i < params.config.levels; ++i) {
    const std::string e = "enc" + std::to_string(i) + ".res";
    commit(e + ".bn1", cache.enc_res[i].bn1, cache.enc_res[i].c1);
    commit(e + ".bn2", cache.enc_res[i].bn2, cache.enc_res[i].c2);
    const std::string d = "dec" + std::to_string(i) + ".res";
    commit(d + ".bn1", cache.dec_res[i].bn1, cache.dec_res[i].c1);
    commit(d + ".bn2", cache.dec_res[i].bn2, cache.dec_res[i].c2);
  }
}

std::vector<double> backward(const ModelParams& params, const ForwardCache& cache,
                             const Tensor& d_denoised, const std::vector<double>& d_logits) {
  const NetConfig& cfg = params.config;
  const int L = cfg.levels;
  const int n = cache.input.n;
  if (!d_denoised.same_shape(cache.denoised)) throw Error("backward: d_denoised shape mismatch");
  if (d_logits.size() != static_cast<std::size_t>(n) * cfg.num_classes) {
    throw Error("backward: d_logits size mismatch");
  }
  if (static_cast<int>(cache.enc_res.size()) != L) throw Error("backward: cache/params mismatch");

  const NetWeights w = params.weights();
  std::vector<double> gradient(params.values.size(), 0.0);
  const NetGrads g = params.grads(gradient);

  Tensor d_pre_out = sigmoid_backward(cache.denoised, d_denoised);
  Tensor d;
  conv2d_backward(cache.final_features, w.out, ConvGeom{}, d_pre_out, &d, g.out);

  std::vector<Tensor> d_skips(L);
  for (int i = 0; i < L; ++i) {
    const auto& dec = w.decoders[i];
    Tensor d_fused = residual_unit_backward(cache.dec_res[i], dec.res, d, g.decoders[i].res);
    Tensor d_cat;
    conv2d_backward(cache.dec_cat[i], dec.fuse, ConvGeom{}, d_fused, &d_cat, g.decoders[i].fuse);
    Tensor d_up;
    split_channels(d_cat, cfg.channels(i + 1), d_up, d_skips[i]);
    d = attention_gate_backward(cache.dec_att[i], dec.att, upsample_nearest2_backward(d_up),
                                g.decoders[i].att);
  }

  // d now holds the decoder's gradient w.r.t. the bottleneck.
  auto d_pooled = linear_backward(cache.pooled, n, w.classifier, d_logits, g.classifier);
  add_inplace(d, global_avg_pool_backward(d_pooled, n, cache.bottleneck.c, cache.bottleneck.h,
                                          cache.bottleneck.w));
  d = aspp_backward(cache.aspp, w.aspp, cfg.aspp_rates, d, g.aspp);

  for (int i = L - 1; i >= 0; --i) {
    const auto& enc = w.encoders[i];
    Tensor d_skip;
    conv2d_backward(cache.skips[i], enc.down, ConvGeom{2, 1, 1}, d, &d_skip, g.encoders[i].down);
    add_inplace(d_skip, d_skips[i]);
    Tensor d_res = se_block_backward(cache.enc_se[i], enc.se, d_skip, g.encoders[i].se);
    d = residual_unit_backward(cache.enc_res[i], enc.res, d_res, g.encoders[i].res);
  }

  Tensor d_bn = relu_backward(cache.stem_out, d);
  Tensor d_stem;
  batchnorm_backward(cache.stem_bn, w.stem_bn, d_bn, d_stem, g.stem_bn);
  conv2d_backward(cache.input, w.stem_conv, same_geom(3), d_stem, nullptr, g.stem_conv);
  return gradient;
}

}  // namespace ccd
