#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "ccd/losses.hpp"
#include "ccd/random.hpp"

using namespace ccd;

TEST(CrossEntropy, ClosedFormValues) {
  EXPECT_NEAR(cross_entropy(std::vector<double>{0, 0, 0}, 2).value, std::log(3.0), 1e-12);
  EXPECT_NEAR(cross_entropy(std::vector<double>{0, 0}, 0).value, std::log(2.0), 1e-12);
  const double expected = std::log(std::exp(10.0) + 2.0) - 10.0;
  EXPECT_NEAR(cross_entropy(std::vector<double>{10, 0, 0}, 0).value, expected, 1e-15);
  EXPECT_NEAR(expected, 9.0799e-5, 1e-8);
}

TEST(CrossEntropy, StableForHugeLogits) {
  const ClassLoss l = cross_entropy(std::vector<double>{1000.0, 0.0, -1000.0}, 1);
  EXPECT_NEAR(l.value, 1000.0, 1e-9);
  EXPECT_NEAR(l.grad[0], 1.0, 1e-12);
  EXPECT_NEAR(l.grad[1], -1.0, 1e-12);
}

TEST(CrossEntropy, RejectsBadInput) {
  EXPECT_THROW(cross_entropy(std::vector<double>{0, 0}, 2), Error);
  EXPECT_THROW(cross_entropy(std::vector<double>{0, NAN}, 0), Error);
}

TEST(Softmax, SumsToOne) {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> z(1 + rng.below(6));
    for (double& v : z) v = rng.normal(0.0, 20.0);
    const auto p = softmax(z);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(RmsLoss, ClosedFormValues) {
  const ImageTensor zeros(2, 2, 0.0);
  EXPECT_DOUBLE_EQ(rms_loss(ImageTensor(2, 2, {0, 0.5, 1, 0.25}), zeros).value, 0.328125);
  EXPECT_DOUBLE_EQ(rms_loss(ImageTensor(2, 2, 1.0), zeros).value, 1.0);
  const PixelLoss same = rms_loss(zeros, zeros);
  EXPECT_EQ(same.value, 0.0);
  for (double g : same.grad.data()) EXPECT_EQ(g, 0.0);
}

TEST(RmsLoss, PositionSubsetUsesItsOwnCount) {
  const ImageTensor pred(2, 2, {1, 2, 3, 4});
  const ImageTensor target(2, 2, 0.0);
  const std::vector<Pixel> pos{{0, 1}, {1, 0}};
  const PixelLoss l = rms_loss(pred, target, pos);
  EXPECT_DOUBLE_EQ(l.value, (4.0 + 9.0) / 2.0);
  EXPECT_EQ(l.grad, ImageTensor(2, 2, {0, 2, 3, 0}));
}

TEST(RmsLoss, RejectsBadInput) {
  EXPECT_THROW(rms_loss(ImageTensor(2, 2), ImageTensor(2, 3)), Error);
  EXPECT_THROW(rms_loss(ImageTensor(2, 2), ImageTensor(2, 2), std::span<const Pixel>{}), Error);
  const std::vector<Pixel> outside{{2, 0}};
  EXPECT_THROW(rms_loss(ImageTensor(2, 2), ImageTensor(2, 2), outside), Error);
}

TEST(CompositeLoss, LinearCombination) {
  // rms = 0.5 from a constant offset of sqrt(0.5); ce = 1.0 from the tuned logit gap.
  const ImageTensor target(2, 2, 0.0);
  const ImageTensor pred(2, 2, std::sqrt(0.5));
  const double gap = std::log(std::exp(1.0) - 1.0);  // ln(1 + e^-gap) = 1 with logits (0, -gap)
  const std::vector<double> logits{0.0, gap};
  const CompositeLoss j = composite_loss(pred, target, std::nullopt, logits, 0, LossWeights{1.0, 0.2});
  EXPECT_NEAR(j.rms, 0.5, 1e-15);
  EXPECT_NEAR(j.ce, 1.0, 1e-15);
  EXPECT_NEAR(j.value, 0.7, 1e-15);
}

TEST(CompositeLoss, Degenerations) {
  Rng rng(2);
  ImageTensor pred(3, 3), target(3, 3);
  for (double& v : pred.data()) v = rng.uniform();
  for (double& v : target.data()) v = rng.uniform();
  const std::vector<double> logits{0.3, -1.2, 2.0};
  const CompositeLoss ce_only = composite_loss(pred, target, std::nullopt, logits, 1, LossWeights{0.0, 1.0});
  EXPECT_EQ(ce_only.value, cross_entropy(logits, 1).value);
  for (double g : ce_only.d_pred.data()) EXPECT_EQ(g, 0.0);
  const CompositeLoss rms_only = composite_loss(pred, target, std::nullopt, logits, 1, LossWeights{1.0, 0.0});
  EXPECT_EQ(rms_only.d_pred, rms_loss(pred, target).grad);
  for (double g : rms_only.d_logits) EXPECT_EQ(g, 0.0);
  EXPECT_THROW(composite_loss(pred, target, std::nullopt, logits, 1, LossWeights{-1.0, 0.0}), Error);
}

TEST(CompositeLoss, LinearInWeights) {
  Rng rng(3);
  ImageTensor pred(4, 4), target(4, 4);
  for (double& v : pred.data()) v = rng.uniform();
  for (double& v : target.data()) v = rng.uniform();
  const std::vector<double> logits{0.5, 0.1, -0.4};
  const double a = composite_loss(pred, target, std::nullopt, logits, 2, LossWeights{1.0, 0.0}).value;
  const double b = composite_loss(pred, target, std::nullopt, logits, 2, LossWeights{0.0, 1.0}).value;
  const double c = composite_loss(pred, target, std::nullopt, logits, 2, LossWeights{0.7, 0.3}).value;
  EXPECT_NEAR(c, 0.7 * a + 0.3 * b, 1e-15);
}

TEST(CompositeLoss, GradientsMatchFiniteDifferences) {
  Rng rng(4);
  ImageTensor pred(4, 4), target(4, 4);
  for (double& v : pred.data()) v = rng.uniform();
  for (double& v : target.data()) v = rng.uniform();
  std::vector<double> logits{0.5, -0.1, 1.4};
  const auto positions = blinded_positions(4, 4, Parity::Odd);
  const LossWeights w{1.0, 0.2};
  auto value = [&] { return composite_loss(pred, target, positions, logits, 2, w).value; };
  const CompositeLoss j = composite_loss(pred, target, positions, logits, 2, w);
  const double h = 1e-5;
  auto rel = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); };
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double saved = pred.data()[i];
    pred.data()[i] = saved + h;
    const double up = value();
    pred.data()[i] = saved - h;
    const double down = value();
    pred.data()[i] = saved;
    const double n = (up - down) / (2 * h);
    if (j.d_pred.data()[i] == 0.0) {
      EXPECT_NEAR(n, 0.0, 1e-12);
    } else {
      EXPECT_LT(rel(j.d_pred.data()[i], n), 1e-8) << i;
    }
  }
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double saved = logits[k];
    logits[k] = saved + h;
    const double up = value();
    logits[k] = saved - h;
    const double down = value();
    logits[k] = saved;
    EXPECT_LT(rel(j.d_logits[k], (up - down) / (2 * h)), 1e-8) << k;
  }
}
