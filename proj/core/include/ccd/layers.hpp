#pragma once

#include <span>
#include <vector>

#include "ccd/tensor.hpp"

namespace ccd {

enum class Mode { train, eval };

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

using ConstSpan = std::span<const double>;
using MutSpan = std::span<double>;

// Parameter views. `S` is ConstSpan for weights and MutSpan for gradients so
// a single layout describes both.

/// weight: out x in x k x k; bias: out values or empty.
template <class S>
struct ConvView {
  S weight;
  S bias;
  int out = 0;
  int in = 0;
  int k = 1;
};

/// Running statistics are empty in gradient views.
template <class S>
struct BatchNormView {
  S gamma;
  S beta;
  S running_mean;
  S running_var;
  int channels = 0;
};

/// weight: out x in row-major.
template <class S>
struct LinearView {
  S weight;
  S bias;
  int out = 0;
  int in = 0;
};

using ConvWeights = ConvView<ConstSpan>;
using ConvGrads = ConvView<MutSpan>;
using BatchNormWeights = BatchNormView<ConstSpan>;
using BatchNormGrads = BatchNormView<MutSpan>;
using LinearWeights = LinearView<ConstSpan>;
using LinearGrads = LinearView<MutSpan>;

struct ConvGeom {
  int stride = 1;
  int pad = 0;
  int dilation = 1;
};

/// "Same" padding for an odd kernel at stride 1.
inline ConvGeom same_geom(int k, int dilation = 1) { return {1, dilation * (k - 1) / 2, dilation}; }

Tensor conv2d(const Tensor& x, const ConvWeights& w, ConvGeom geom);

/// Accumulates into dw (weight and, if present, bias). Overwrites *dx when
/// dx is non-null.
void conv2d_backward(const Tensor& x, const ConvWeights& w, ConvGeom geom, const Tensor& dy,
                     Tensor* dx, const ConvGrads& dw);

struct BatchNormCache {
  Mode mode = Mode::eval;
  Tensor xhat;
  std::vector<double> mean;
  std::vector<double> var;
  std::vector<double> inv_std;
};

/// Train mode normalises with statistics over (N, H, W); eval mode with the
/// running statistics.
Tensor batchnorm(const Tensor& x, const BatchNormWeights& w, Mode mode, BatchNormCache& cache);

void batchnorm_backward(const BatchNormCache& cache, const BatchNormWeights& w,
                        const Tensor& dy, Tensor& dx, const BatchNormGrads& dw);

/// running <- (1 - momentum) * running + momentum * batch, with the unbiased
/// batch variance.
void update_running_stats(const BatchNormCache& cache, long count, MutSpan running_mean,
                          MutSpan running_var, double momentum = kBatchNormMomentum);

double sigmoid(double x) noexcept;

Tensor relu(const Tensor& x);
/// Gradient through ReLU given its output.
Tensor relu_backward(const Tensor& y, const Tensor& dy);

Tensor sigmoid(const Tensor& x);
Tensor sigmoid_backward(const Tensor& y, const Tensor& dy);

/// n x c means, row-major.
std::vector<double> global_avg_pool(const Tensor& x);
Tensor global_avg_pool_backward(const std::vector<double>& dz, int n, int c, int h, int w);

Tensor upsample_nearest2(const Tensor& x);
Tensor upsample_nearest2_backward(const Tensor& dy);

Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& d, int first_channels, Tensor& da, Tensor& db);

/// Rows of x (n x in) mapped to n x out.
std::vector<double> linear(std::span<const double> x, int n, const LinearWeights& w);
/// Accumulates dw; returns dx (n x in).
std::vector<double> linear_backward(std::span<const double> x, int n, const LinearWeights& w,
                                    std::span<const double> dy, const LinearGrads& dw);

}  // namespace ccd
