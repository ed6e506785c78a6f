#include <cmath>

#include <gtest/gtest.h>

#include "ccd/metrics.hpp"
#include "ccd/report.hpp"
#include "metric_oracle.hpp"

using namespace ccd;

namespace {

const Roi kLeft{"fg", RoiPurpose::foreground, 0, 0, 2, 2};
const Roi kRight{"bg", RoiPurpose::background, 0, 2, 2, 4};

// fg {1,2,3,4} on the left, bg {0,0,1,1} on the right.
ImageTensor two_regions() { return ImageTensor(2, 4, {1, 2, 0, 0, 3, 4, 1, 1}); }

ImageTensor random_image(Rng& rng, int h, int w, double lo = 0.05, double hi = 1.0) {
  ImageTensor img(h, w);
  for (double& v : img.data()) v = rng.uniform(lo, hi);
  return img;
}

RoiSet full_set(int h, int w) {
  return RoiSet{{{"fg", RoiPurpose::foreground, 0, 0, h / 2, w},
                 {"bg", RoiPurpose::background, h / 2, 0, h, w},
                 {"tex", RoiPurpose::texture, 0, 0, h, w},
                 {"edge", RoiPurpose::edge, 1, 1, h - 1, w - 1}}};
}

}  // namespace

TEST(RegionStats, HandValues) {
  const auto f = region_stats(two_regions(), kLeft);
  EXPECT_DOUBLE_EQ(f.mean, 2.5);
  EXPECT_NEAR(f.stddev, std::sqrt(1.25), 1e-15);
  const auto b = region_stats(two_regions(), kRight);
  EXPECT_DOUBLE_EQ(b.mean, 0.5);
  EXPECT_DOUBLE_EQ(b.stddev, 0.5);
  const auto c = region_stats(ImageTensor(3, 3, 0.4), Roi{"c", RoiPurpose::texture, 0, 0, 3, 3});
  EXPECT_DOUBLE_EQ(c.mean, 0.4);
  EXPECT_EQ(c.stddev, 0.0);
  EXPECT_THROW(region_stats(two_regions(), Roi{"x", RoiPurpose::texture, 0, 0, 1, 1}), Error);
  EXPECT_THROW(region_stats(two_regions(), Roi{"x", RoiPurpose::texture, 0, 3, 2, 5}), Error);
}

TEST(Cnr, HandValueAndDecibels) {
  const CnrValue v = cnr(two_regions(), kLeft, kRight);
  EXPECT_NEAR(v.linear, 2.0 / std::sqrt(0.75), 1e-15);
  EXPECT_NEAR(v.linear, 2.30940, 1e-5);
  EXPECT_NEAR(v.db, 3.6349, 1e-4);
  EXPECT_EQ(v.db, 10.0 * std::log10(v.linear));
}

TEST(Cnr, ShiftAndScaleInvariance) {
  ImageTensor shifted = two_regions();
  for (double& x : shifted.data()) x += 0.1;
  ImageTensor scaled = two_regions();
  for (double& x : scaled.data()) x *= 3.0;
  const double base = cnr(two_regions(), kLeft, kRight).linear;
  EXPECT_NEAR(cnr(shifted, kLeft, kRight).linear, base, 1e-13);
  EXPECT_NEAR(cnr(scaled, kLeft, kRight).linear, base, 1e-13);
}

TEST(Cnr, DegenerateInputs) {
  try {
    cnr(ImageTensor(2, 4, {1, 1, 0, 0, 1, 1, 0, 0}), kLeft, kRight);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("zero denominator"), std::string::npos);
  }
  try {
    cnr(ImageTensor(2, 4, {0, 1, 0, 1, 1, 0, 1, 0}), kLeft, kRight);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("zero contrast"), std::string::npos);
  }
}

TEST(Msr, HandValueAndInvariance) {
  EXPECT_NEAR(msr(two_regions(), kLeft), 2.5 / std::sqrt(1.25), 1e-15);
  EXPECT_NEAR(msr(two_regions(), kLeft), 2.23607, 1e-5);
  ImageTensor scaled = two_regions();
  for (double& x : scaled.data()) x *= 0.2;
  EXPECT_NEAR(msr(scaled, kLeft), msr(two_regions(), kLeft), 1e-13);
  try {
    msr(ImageTensor(2, 2, 0.5), Roi{"c", RoiPurpose::foreground, 0, 0, 2, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("zero standard deviation"), std::string::npos);
  }
}

TEST(Tp, IdentityScalingAndConstant) {
  Rng rng(1);
  const ImageTensor noisy = random_image(rng, 6, 6);
  const Roi roi{"t", RoiPurpose::texture, 1, 1, 5, 6};
  EXPECT_EQ(tp(noisy, noisy, roi), 1.0);
  ImageTensor four = noisy;
  for (double& x : four.data()) x *= 4.0;
  EXPECT_NEAR(tp(four, noisy, roi), 32.0, 1e-12);
  EXPECT_EQ(tp(ImageTensor(6, 6, 0.3), noisy, roi), 0.0);
  EXPECT_THROW(tp(noisy, ImageTensor(6, 6, 0.3), roi), Error);
  ImageTensor negative = noisy;
  for (double& x : negative.data()) x -= 2.0;
  EXPECT_THROW(tp(noisy, negative, roi), Error);
}

TEST(Ep, IdentityAffineAndSignFlip) {
  Rng rng(2);
  const ImageTensor noisy = random_image(rng, 7, 7);
  const Roi roi{"e", RoiPurpose::edge, 0, 0, 7, 7};
  EXPECT_EQ(ep(noisy, noisy, roi), 1.0);
  ImageTensor affine = noisy, flipped = noisy;
  for (double& x : affine.data()) x = 2.5 * x + 0.3;
  for (double& x : flipped.data()) x = -x;
  EXPECT_NEAR(ep(affine, noisy, roi), 1.0, 1e-12);
  EXPECT_NEAR(ep(flipped, noisy, roi), -1.0, 1e-12);
  EXPECT_THROW(ep(noisy, noisy, Roi{"e", RoiPurpose::edge, 0, 0, 2, 7}), Error);
  EXPECT_THROW(ep(ImageTensor(7, 7, 0.5), noisy, roi), Error);
}

TEST(Ep, BoundedByOne) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const ImageTensor a = random_image(rng, 8, 8), b = random_image(rng, 8, 8);
    const double v = ep(a, b, Roi{"e", RoiPurpose::edge, 0, 0, 8, 8});
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Metrics, MatchBruteForceOracle) {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const int h = 6 + static_cast<int>(rng.below(30)), w = 6 + static_cast<int>(rng.below(30));
    const ImageTensor noisy = random_image(rng, h, w), den = random_image(rng, h, w);
    const Roi fg = oracle::random_roi(rng, h, w, 2, RoiPurpose::foreground);
    const Roi bg = oracle::random_roi_apart(rng, h, w, 2, RoiPurpose::background, fg);
    const Roi tex = oracle::random_roi(rng, h, w, 2, RoiPurpose::texture);
    const Roi edge = oracle::random_roi(rng, h, w, 3, RoiPurpose::edge);
    EXPECT_NEAR(cnr(den, fg, bg).linear, oracle::cnr_linear(den, fg, bg), 1e-12);
    EXPECT_NEAR(msr(den, fg), oracle::msr(den, fg), 1e-12);
    EXPECT_NEAR(tp(den, noisy, tex), oracle::tp(den, noisy, tex), 1e-12);
    EXPECT_NEAR(ep(den, noisy, edge), oracle::ep(den, noisy, edge), 1e-12);
  }
}

TEST(Psnr, KnownValues) {
  EXPECT_TRUE(std::isinf(psnr(ImageTensor(2, 2, 0.5), ImageTensor(2, 2, 0.5))));
  EXPECT_NEAR(psnr(ImageTensor(2, 2, 0.1), ImageTensor(2, 2, 0.0)), 20.0, 1e-12);
}

TEST(RoiSet, Validation) {
  EXPECT_NO_THROW(full_set(8, 8).validate(8, 8));
  RoiSet two_bg = full_set(8, 8);
  two_bg.rois.push_back({"bg2", RoiPurpose::background, 0, 0, 2, 2});
  EXPECT_THROW(two_bg.validate(8, 8), Error);
  RoiSet no_edge = full_set(8, 8);
  no_edge.rois.pop_back();
  EXPECT_THROW(no_edge.validate(8, 8), Error);
  EXPECT_THROW(full_set(8, 8).validate(6, 8), Error);
}

TEST(EvaluateImage, SelfIdentitiesAndHeadline) {
  Rng rng(5);
  const ImageTensor x = random_image(rng, 10, 10);
  const MetricReport r = evaluate_image(x, x, full_set(10, 10));
  EXPECT_EQ(r.tp.mean, 1.0);
  EXPECT_EQ(r.ep.mean, 1.0);
  EXPECT_EQ(r.tp.stddev, 0.0);
  EXPECT_EQ(r.cnr_db.values[0], 10.0 * std::log10(r.cnr_linear.values[0]));
  EXPECT_EQ(r.cnr_db_headline(), 10.0 * std::log10(r.cnr()));
}

TEST(Summary, PopulationSpread) {
  const Summary s = summarize({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.stddev, std::sqrt(1.25), 1e-15);
}

TEST(Report, RowsAggregateImages) {
  Rng rng(6);
  std::vector<EvaluationPair> pairs;
  for (int i = 0; i < 3; ++i) {
    const ImageTensor clean = random_image(rng, 10, 10, 0.2, 0.8);
    ImageTensor noisy = clean;
    for (double& v : noisy.data()) v += rng.normal(0.0, 0.05);
    pairs.push_back({"img" + std::to_string(i), noisy, clean, clean});
  }
  const EvaluationReport rep = evaluate(pairs, full_set(10, 10));
  ASSERT_EQ(rep.images.size(), 3u);
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_EQ(rep.rows[0].method, "noisy");
  EXPECT_EQ(rep.rows[1].method, "denoised");
  EXPECT_EQ(rep.rows[0].tp.mean, 1.0);
  EXPECT_EQ(rep.rows[0].ep.mean, 1.0);
  double sum = 0.0;
  for (const auto& im : rep.images) sum += im.denoised.cnr();
  EXPECT_NEAR(rep.rows[1].cnr_linear.mean, sum / 3.0, 1e-15);
  EXPECT_EQ(rep.rows[1].cnr_db, 10.0 * std::log10(rep.rows[1].cnr_linear.mean));
  ASSERT_TRUE(rep.rows[1].psnr.has_value());
  EXPECT_TRUE(std::isinf(rep.rows[1].psnr->mean));
  const auto j = to_json(rep);
  EXPECT_EQ(j.at("rows").size(), 2u);
  EXPECT_NE(format_table(rep).find("PSNR"), std::string::npos);
}
