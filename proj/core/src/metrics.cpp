#include "ccd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ccd {

namespace {

void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* what) {
  if (!a.same_shape(b)) throw Error(std::string(what) + ": image shapes differ");
}

// Laplacian of the ROI interior, row-major.
std::vector<double> laplacian(const ImageTensor& img, const Roi& roi) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(roi.rows() - 2) * (roi.cols() - 2));
  for (int r = roi.top + 1; r < roi.bottom - 1; ++r) {
    for (int c = roi.left + 1; c < roi.right - 1; ++c) {
      out.push_back(img(r - 1, c) + img(r + 1, c) + img(r, c - 1) + img(r, c + 1) - 4.0 * img(r, c));
    }
  }
  return out;
}

void center(std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (double& x : v) x -= mean;
}

}  // namespace

RegionStats region_stats(const ImageTensor& img, const Roi& roi) {
  roi.check_within(img.height(), img.width());
  const double n = static_cast<double>(roi.area());
  double sum = 0.0;
  double lo = img(roi.top, roi.left);
  double hi = lo;
  for (int r = roi.top; r < roi.bottom; ++r) {
    for (int c = roi.left; c < roi.right; ++c) {
      sum += img(r, c);
      lo = std::min(lo, img(r, c));
      hi = std::max(hi, img(r, c));
    }
  }
  // Exact for constant regions, where sum / n can round away from the value.
  if (lo == hi) return {lo, 0.0};
  const double mean = sum / n;
  double ss = 0.0;
  for (int r = roi.top; r < roi.bottom; ++r) {
    for (int c = roi.left; c < roi.right; ++c) ss += (img(r, c) - mean) * (img(r, c) - mean);
  }
  return {mean, std::sqrt(ss / n)};
}

CnrValue cnr(const ImageTensor& img, const Roi& foreground, const Roi& background) {
  const RegionStats f = region_stats(img, foreground);
  const RegionStats b = region_stats(img, background);
  const double denom = std::sqrt(0.5 * (f.stddev * f.stddev + b.stddev * b.stddev));
  if (denom == 0.0) throw Error("cnr: zero denominator (both regions constant)");
  const double linear = std::abs(f.mean - b.mean) / denom;
  if (linear == 0.0) throw Error("cnr: zero contrast");
  return {linear, 10.0 * std::log10(linear)};
}

double msr(const ImageTensor& img, const Roi& foreground) {
  const RegionStats s = region_stats(img, foreground);
  if (s.stddev == 0.0) throw Error("msr: zero standard deviation");
  return s.mean / s.stddev;
}

double tp(const ImageTensor& denoised, const ImageTensor& noisy, const Roi& roi) {
  require_same_shape(denoised, noisy, "tp");
  const RegionStats d = region_stats(denoised, roi);
  const RegionStats n = region_stats(noisy, roi);
  if (n.stddev == 0.0) throw Error("tp: zero noisy variance");
  if (!(n.mean > 0.0)) throw Error("tp: noisy mean must be positive");
  if (d.mean < 0.0) throw Error("tp: denoised mean is negative");
  return (d.stddev * d.stddev) / (n.stddev * n.stddev) * std::sqrt(d.mean / n.mean);
}

double ep(const ImageTensor& denoised, const ImageTensor& noisy, const Roi& roi) {
  require_same_shape(denoised, noisy, "ep");
  roi.check_within(noisy.height(), noisy.width());
  if (roi.rows() < 3 || roi.cols() < 3) throw Error("ep: edge ROI must be at least 3x3");
  auto ld = laplacian(denoised, roi);
  auto ln = laplacian(noisy, roi);
  center(ld);
  center(ln);
  const double dn = std::inner_product(ld.begin(), ld.end(), ln.begin(), 0.0);
  const double dd = std::inner_product(ld.begin(), ld.end(), ld.begin(), 0.0);
  const double nn = std::inner_product(ln.begin(), ln.end(), ln.begin(), 0.0);
  if (dd == 0.0 || nn == 0.0) throw Error("ep: degenerate ROI (constant Laplacian)");
  return std::clamp(dn / std::sqrt(dd * nn), -1.0, 1.0);
}

double psnr(const ImageTensor& img, const ImageTensor& reference, double peak) {
  require_same_shape(img, reference, "psnr");
  double ss = 0.0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double d = img.data()[i] - reference.data()[i];
    ss += d * d;
  }
  const double mse = ss / static_cast<double>(img.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

Summary summarize(std::vector<double> values) {
  Summary s;
  s.values = std::move(values);
  if (s.values.empty()) return s;
  const double n = static_cast<double>(s.values.size());
  s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / n);
  return s;
}

std::vector<Roi> RoiSet::of(RoiPurpose purpose) const {
  std::vector<Roi> out;
  for (const auto& r : rois) {
    if (r.purpose == purpose) out.push_back(r);
  }
  return out;
}

const Roi& RoiSet::background() const {
  const Roi* found = nullptr;
  for (const auto& r : rois) {
    if (r.purpose != RoiPurpose::background) continue;
    if (found) throw Error("exactly one background ROI is required");
    found = &r;
  }
  if (!found) throw Error("a background ROI is required");
  return *found;
}

void RoiSet::validate(int height, int width) const {
  for (const auto& r : rois) r.check_within(height, width);
  background();
  for (RoiPurpose p : {RoiPurpose::foreground, RoiPurpose::texture, RoiPurpose::edge}) {
    if (of(p).empty()) throw Error("missing " + std::string(to_string(p)) + " ROI");
  }
  for (const auto& r : of(RoiPurpose::edge)) {
    if (r.rows() < 3 || r.cols() < 3) throw Error("edge ROI '" + r.name + "' must be at least 3x3");
  }
}

double MetricReport::cnr_db_headline() const { return 10.0 * std::log10(cnr_linear.mean); }

MetricReport evaluate_image(const ImageTensor& denoised, const ImageTensor& noisy, const RoiSet& rois) {
  require_same_shape(denoised, noisy, "evaluate");
  rois.validate(noisy.height(), noisy.width());
  const Roi& bg = rois.background();
  std::vector<double> lin, db, ms, tps, eps;
  for (const auto& fg : rois.of(RoiPurpose::foreground)) {
    const CnrValue v = cnr(denoised, fg, bg);
    lin.push_back(v.linear);
    db.push_back(v.db);
    ms.push_back(msr(denoised, fg));
  }
  for (const auto& r : rois.of(RoiPurpose::texture)) tps.push_back(tp(denoised, noisy, r));
  for (const auto& r : rois.of(RoiPurpose::edge)) eps.push_back(ep(denoised, noisy, r));
  return {summarize(std::move(lin)), summarize(std::move(db)), summarize(std::move(ms)),
          summarize(std::move(tps)), summarize(std::move(eps))};
}

}  // namespace ccd
