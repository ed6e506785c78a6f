#pragma once

#include <vector>

#include "ccd/layers.hpp"

namespace ccd {

// Composite blocks of the encoder-decoder. Each forward takes an optional
// cache; backward consumes the cache, accumulates parameter gradients into
// the gradient view and returns the input gradient.

/// y = x + F(x), F = conv3x3 -> BN -> ReLU -> conv3x3 -> BN.
template <class S>
struct ResidualView {
  ConvView<S> conv1;
  BatchNormView<S> bn1;
  ConvView<S> conv2;
  BatchNormView<S> bn2;
};
using ResidualWeights = ResidualView<ConstSpan>;
using ResidualGrads = ResidualView<MutSpan>;

struct ResidualCache {
  Tensor x;
  Tensor c1;
  BatchNormCache bn1;
  Tensor a1;
  Tensor c2;
  BatchNormCache bn2;
};

Tensor residual_unit(const Tensor& x, const ResidualWeights& w, Mode mode,
                     ResidualCache* cache = nullptr);
Tensor residual_unit_backward(const ResidualCache& cache, const ResidualWeights& w,
                              const Tensor& dy, const ResidualGrads& g);

/// Squeeze-and-excitation: s = sigmoid(W2 relu(W1 z)), z the per-channel mean;
/// each channel is scaled by its s. w1 is reduced x channels, w2 is
/// channels x reduced, no biases.
template <class S>
struct SeView {
  S w1;
  S w2;
  int channels = 0;
  int reduced = 0;
};
using SeWeights = SeView<ConstSpan>;
using SeGrads = SeView<MutSpan>;

struct SeCache {
  Tensor x;
  std::vector<double> z;       // n x channels
  std::vector<double> hidden;  // n x reduced, after ReLU
  std::vector<double> scale;   // n x channels
};

Tensor se_block(const Tensor& x, const SeWeights& w, SeCache* cache = nullptr);
Tensor se_block_backward(const SeCache& cache, const SeWeights& w, const Tensor& dy,
                         const SeGrads& g);

/// Parallel dilated 3x3 branches (one per rate), summed, then a 1x1 projection.
template <class S>
struct AsppView {
  std::vector<ConvView<S>> branches;
  ConvView<S> project;
};
using AsppWeights = AsppView<ConstSpan>;
using AsppGrads = AsppView<MutSpan>;

struct AsppCache {
  Tensor x;
  Tensor sum;
};

Tensor aspp(const Tensor& x, const AsppWeights& w, const std::vector<int>& rates,
            AsppCache* cache = nullptr);
Tensor aspp_backward(const AsppCache& cache, const AsppWeights& w, const std::vector<int>& rates,
                     const Tensor& dy, const AsppGrads& g);

/// Per-pixel gate A = sigmoid(W2 tanh(W1 f + b1) + b2), output A * f with A
/// broadcast over channels. w1: hidden x channels, b1: hidden, w2: hidden,
/// b2: one value.
template <class S>
struct AttentionView {
  S w1;
  S b1;
  S w2;
  S b2;
  int channels = 0;
  int hidden = 0;
};
using AttentionWeights = AttentionView<ConstSpan>;
using AttentionGrads = AttentionView<MutSpan>;

struct AttentionCache {
  Tensor f;
  Tensor hidden;  // tanh activations, n x hidden x h x w
  Tensor gate;    // n x 1 x h x w
};

Tensor attention_gate(const Tensor& f, const AttentionWeights& w, AttentionCache* cache = nullptr);
Tensor attention_gate_backward(const AttentionCache& cache, const AttentionWeights& w,
                               const Tensor& dy, const AttentionGrads& g);

}  // namespace ccd
