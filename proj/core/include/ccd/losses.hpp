#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ccd/checkerboard.hpp"
#include "ccd/image.hpp"

namespace ccd {

struct LossWeights {
  double w_r = 1.0;  // pixel term
  double w_c = 0.2;  // classification term
  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct PixelLoss {
  double value = 0.0;
  ImageTensor grad;  // d value / d pred
};

/// Mean squared error over `positions` (every pixel when absent). Named after
/// the "RMS" loss it implements but carries no square root.
PixelLoss rms_loss(const ImageTensor& pred, const ImageTensor& target,
                   std::optional<std::span<const Pixel>> positions = std::nullopt);

struct ClassLoss {
  double value = 0.0;
  std::vector<double> grad;  // softmax(logits) - onehot(label)
};

/// Negative log-softmax of the labelled class, computed with max subtraction.
ClassLoss cross_entropy(std::span<const double> logits, int label);

std::vector<double> softmax(std::span<const double> logits);

struct CompositeLoss {
  double value = 0.0;
  double rms = 0.0;
  double ce = 0.0;
  ImageTensor d_pred;
  std::vector<double> d_logits;
};

/// J = w_r * rms_loss + w_c * cross_entropy.
CompositeLoss composite_loss(const ImageTensor& pred, const ImageTensor& target,
                             std::optional<std::span<const Pixel>> positions,
                             std::span<const double> logits, int label, const LossWeights& weights);

}  // namespace ccd
