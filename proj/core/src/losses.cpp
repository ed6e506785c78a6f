#include "ccd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ccd {

void LossWeights::validate() const {
  if (!std::isfinite(w_r) || !std::isfinite(w_c) || w_r < 0.0 || w_c < 0.0) {
    throw Error("loss weights must be finite and non-negative");
  }
}

PixelLoss rms_loss(const ImageTensor& pred, const ImageTensor& target,
                   std::optional<std::span<const Pixel>> positions) {
  if (!pred.same_shape(target)) throw Error("rms_loss: shape mismatch");
  PixelLoss out{0.0, ImageTensor(pred.height(), pred.width(), 0.0)};
  if (!positions) {
    const double count = static_cast<double>(pred.size());
    auto p = pred.data();
    auto t = target.data();
    auto g = out.grad.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double diff = p[i] - t[i];
      out.value += diff * diff;
      g[i] = 2.0 * diff / count;
    }
    out.value /= count;
    return out;
  }
  if (positions->empty()) throw Error("rms_loss: empty position set");
  const double count = static_cast<double>(positions->size());
  for (const auto& [r, c] : *positions) {
    if (r < 0 || c < 0 || r >= pred.height() || c >= pred.width()) {
      throw Error("rms_loss: position outside image");
    }
    const double diff = pred(r, c) - target(r, c);
    out.value += diff * diff;
    out.grad(r, c) += 2.0 * diff / count;
  }
  out.value /= count;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - m);
    z += p[k];
  }
  for (double& v : p) v /= z;
  return p;
}

ClassLoss cross_entropy(std::span<const double> logits, int label) {
  if (logits.empty()) throw Error("cross_entropy: empty logits");
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw Error("cross_entropy: label " + std::to_string(label) + " out of range");
  }
  for (double v : logits) {
    if (!std::isfinite(v)) throw Error("cross_entropy: non-finite logits");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  ClassLoss out;
  out.value = m + std::log(z) - logits[label];
  out.grad = softmax(logits);
  out.grad[label] -= 1.0;
  return out;
}

CompositeLoss composite_loss(const ImageTensor& pred, const ImageTensor& target,
                             std::optional<std::span<const Pixel>> positions,
                             std::span<const double> logits, int label, const LossWeights& weights) {
  weights.validate();
  PixelLoss pix = rms_loss(pred, target, positions);
  ClassLoss cls = cross_entropy(logits, label);
  CompositeLoss out;
  out.rms = pix.value;
  out.ce = cls.value;
  out.value = weights.w_r * pix.value + weights.w_c * cls.value;
  out.d_pred = std::move(pix.grad);
  for (double& g : out.d_pred.data()) g *= weights.w_r;
  out.d_logits = std::move(cls.grad);
  for (double& g : out.d_logits) g *= weights.w_c;
  return out;
}

}  // namespace ccd
