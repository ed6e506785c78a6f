#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ccd/blocks.hpp"
#include "ccd/image.hpp"

namespace ccd {

/// Encoder-decoder shape. Level i works at (H / 2^i) x (W / 2^i) with
/// base_channels * 2^i channels; the bottleneck sits at level `levels`.
struct NetConfig {
  int levels = 3;
  int base_channels = 16;
  std::vector<int> aspp_rates{1, 2, 4};
  int num_classes = 3;
  int height = 64;
  int width = 64;

  int channels(int level) const { return base_channels << level; }
  void validate() const;

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// SE and attention hidden widths are channels / kReduction (at least 1).
inline constexpr int kReduction = 4;

struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Name -> slice table for the flat parameter and buffer vectors.
class ParamLayout {
 public:
  explicit ParamLayout(const NetConfig& config);

  const std::vector<ParamSpec>& params() const noexcept { return params_; }
  const std::vector<ParamSpec>& buffers() const noexcept { return buffers_; }
  std::size_t param_count() const noexcept { return param_count_; }
  std::size_t buffer_count() const noexcept { return buffer_count_; }

  const ParamSpec& param(const std::string& name) const;
  const ParamSpec& buffer(const std::string& name) const;

 private:
  void add_param(std::string name, std::vector<int> shape);
  void add_buffer(std::string name, std::vector<int> shape);

  std::vector<ParamSpec> params_;
  std::vector<ParamSpec> buffers_;
  std::map<std::string, std::size_t> param_index_;
  std::map<std::string, std::size_t> buffer_index_;
  std::size_t param_count_ = 0;
  std::size_t buffer_count_ = 0;
};

template <class S>
struct EncoderView {
  ResidualView<S> res;
  SeView<S> se;
  ConvView<S> down;  // 3x3 stride-2
};

template <class S>
struct DecoderView {
  AttentionView<S> att;
  ConvView<S> fuse;  // 1x1 over [upsampled, skip]
  ResidualView<S> res;
};

template <class S>
struct NetView {
  ConvView<S> stem_conv;
  BatchNormView<S> stem_bn;
  std::vector<EncoderView<S>> encoders;  // index = level
  AsppView<S> aspp;
  LinearView<S> classifier;
  std::vector<DecoderView<S>> decoders;  // index = level
  ConvView<S> out;
};

using NetWeights = NetView<ConstSpan>;
using NetGrads = NetView<MutSpan>;

/// All learnable weights of one predictor plus BatchNorm running statistics.
struct ModelParams {
  NetConfig config;
  std::vector<double> values;
  std::vector<double> buffers;

  NetWeights weights() const;
  NetGrads grads(std::vector<double>& gradient) const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

ModelParams init_params(const NetConfig& config, std::uint64_t seed);

struct ForwardCache {
  Mode mode = Mode::eval;
  Tensor input;
  Tensor stem_pre;
  BatchNormCache stem_bn;
  Tensor stem_out;
  std::vector<ResidualCache> enc_res;
  std::vector<SeCache> enc_se;
  std::vector<Tensor> skips;
  std::vector<Tensor> enc_out;  // stride-2 outputs, index = level
  AsppCache aspp;
  Tensor bottleneck;
  std::vector<double> pooled;
  std::vector<AttentionCache> dec_att;
  std::vector<Tensor> dec_cat;
  std::vector<ResidualCache> dec_res;
  Tensor final_features;
  Tensor denoised;
};

struct ForwardOutput {
  Tensor denoised;              // n x 1 x H x W, values in (0, 1)
  std::vector<double> logits;   // n x num_classes
  int num_classes = 0;
  ForwardCache cache;

  ImageTensor image(int index) const;
  std::vector<double> logits_of(int index) const;
};

/// Stacks same-shaped images into an n x 1 x H x W tensor.
Tensor to_batch(const std::vector<ImageTensor>& images);

/// Train mode normalises with batch statistics and leaves running statistics
/// untouched; call commit_batch_statistics afterwards to fold them in.
ForwardOutput forward(const ModelParams& params, const Tensor& input, Mode mode);
ForwardOutput forward(const ModelParams& params, const ImageTensor& img, Mode mode);

void commit_batch_statistics(ModelParams& params, const ForwardCache& cache);

/// Gradient of <d_denoised, denoised> + <d_logits, logits> with respect to
/// every entry of params.values.
std::vector<double> backward(const ModelParams& params, const ForwardCache& cache,
                             const Tensor& d_denoised, const std::vector<double>& d_logits);

}  // namespace ccd
