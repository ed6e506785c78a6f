#pragma once

#include <span>
#include <vector>

#include "ccd/image.hpp"

namespace ccd {

struct RegionStats {
  double mean = 0.0;
  double stddev = 0.0;  // population form (divide by n)
};

RegionStats region_stats(const ImageTensor& img, const Roi& roi);

struct CnrValue {
  double linear = 0.0;
  double db = 0.0;
};

/// |mu_f - mu_b| / sqrt(0.5 (sigma_f^2 + sigma_b^2)) and 10 log10 of it.
CnrValue cnr(const ImageTensor& img, const Roi& foreground, const Roi& background);
double msr(const ImageTensor& img, const Roi& foreground);
/// (sigma_den^2 / sigma_noisy^2) * sqrt(mu_den / mu_noisy) inside `roi`.
double tp(const ImageTensor& denoised, const ImageTensor& noisy, const Roi& roi);
/// Pearson correlation of the 5-point Laplacians over the ROI interior.
double ep(const ImageTensor& denoised, const ImageTensor& noisy, const Roi& roi);
/// 10 log10(peak^2 / MSE); +inf for identical images.
double psnr(const ImageTensor& img, const ImageTensor& reference, double peak = 1.0);

/// Per-item values with their mean and population spread.
struct Summary {
  std::vector<double> values;
  double mean = 0.0;
  double stddev = 0.0;
};

Summary summarize(std::vector<double> values);

/// ROIs grouped by purpose. A complete set has at least one foreground,
/// texture and edge ROI and exactly one background ROI.
struct RoiSet {
  std::vector<Roi> rois;

  std::vector<Roi> of(RoiPurpose purpose) const;
  const Roi& background() const;
  /// Checks the purpose counts and that every ROI fits a height x width image.
  void validate(int height, int width) const;
};

/// All four indices of one denoised image against its noisy input.
struct MetricReport {
  Summary cnr_linear;  // one value per foreground ROI
  Summary cnr_db;      // 10 log10 of each per-ROI linear value
  Summary msr;
  Summary tp;
  Summary ep;

  /// Headline figures. cnr_db_headline is 10 log10(cnr_linear.mean).
  double cnr() const { return cnr_linear.mean; }
  double cnr_db_headline() const;
};

MetricReport evaluate_image(const ImageTensor& denoised, const ImageTensor& noisy, const RoiSet& rois);

}  // namespace ccd
