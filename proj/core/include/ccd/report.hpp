#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccd/metrics.hpp"

namespace ccd {

struct EvaluationPair {
  std::string name;
  ImageTensor noisy;
  ImageTensor denoised;
  std::optional<ImageTensor> clean;
};

struct ImageEvaluation {
  std::string name;
  MetricReport noisy;     // noisy image scored against itself
  MetricReport denoised;
  std::optional<double> psnr_noisy;     // PSNR(noisy, clean)
  std::optional<double> psnr_denoised;  // PSNR(denoised, clean)
};

/// One table row aggregated over images (mean and population spread of the
/// per-image headline values).
struct MethodRow {
  std::string method;
  Summary cnr_linear;
  double cnr_db = 0.0;   // 10 log10(cnr_linear.mean)
  Summary cnr_db_images; // per-image 10 log10 values
  Summary msr;
  Summary tp;
  Summary ep;
  std::optional<Summary> psnr;
};

struct EvaluationReport {
  std::vector<ImageEvaluation> images;
  std::vector<MethodRow> rows;  // "noisy" then "denoised"
};

/// Scores every pair; per-image work may run in parallel, output order follows `pairs`.
EvaluationReport evaluate(const std::vector<EvaluationPair>& pairs, const RoiSet& rois);

nlohmann::json to_json(const MetricReport& report);
nlohmann::json to_json(const EvaluationReport& report);

/// Aligned plain-text table: method, CNR, CNR(dB), MSR, TP, EP[, PSNR].
std::string format_table(const EvaluationReport& report);

}  // namespace ccd
