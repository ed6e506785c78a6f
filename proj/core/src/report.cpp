#include "ccd/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ccd/parallel.hpp"

namespace ccd {

using nlohmann::json;

namespace {

MethodRow aggregate(const std::string& method, const std::vector<ImageEvaluation>& images,
                    bool denoised) {
  std::vector<double> lin, db, ms, tps, eps, ps;
  bool have_psnr = !images.empty();
  for (const auto& img : images) {
    const MetricReport& r = denoised ? img.denoised : img.noisy;
    lin.push_back(r.cnr());
    db.push_back(r.cnr_db_headline());
    ms.push_back(r.msr.mean);
    tps.push_back(r.tp.mean);
    eps.push_back(r.ep.mean);
    const auto& p = denoised ? img.psnr_denoised : img.psnr_noisy;
    if (p) ps.push_back(*p);
    else have_psnr = false;
  }
  MethodRow row;
  row.method = method;
  row.cnr_linear = summarize(std::move(lin));
  row.cnr_db = 10.0 * std::log10(row.cnr_linear.mean);
  row.cnr_db_images = summarize(std::move(db));
  row.msr = summarize(std::move(ms));
  row.tp = summarize(std::move(tps));
  row.ep = summarize(std::move(eps));
  if (have_psnr) row.psnr = summarize(std::move(ps));
  return row;
}

std::string cell(const Summary& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f +- %.3f", s.mean, s.stddev);
  return buf;
}

std::string cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

EvaluationReport evaluate(const std::vector<EvaluationPair>& pairs, const RoiSet& rois) {
  if (pairs.empty()) throw Error("evaluate: no image pairs");
  EvaluationReport report;
  report.images.resize(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    const auto& p = pairs[i];
    ImageEvaluation& e = report.images[i];
    e.name = p.name;
    try {
      e.noisy = evaluate_image(p.noisy, p.noisy, rois);
      e.denoised = evaluate_image(p.denoised, p.noisy, rois);
      if (p.clean) {
        e.psnr_noisy = psnr(p.noisy, *p.clean);
        e.psnr_denoised = psnr(p.denoised, *p.clean);
      }
    } catch (const Error& err) {
      throw Error(p.name + ": " + err.what());
    }
  });
  report.rows.push_back(aggregate("noisy", report.images, false));
  report.rows.push_back(aggregate("denoised", report.images, true));
  return report;
}

json to_json(const MetricReport& r) {
  return json{{"cnr_linear", r.cnr()},
              {"cnr_db", r.cnr_db_headline()},
              {"msr", r.msr.mean},
              {"tp", r.tp.mean},
              {"ep", r.ep.mean},
              {"per_roi",
               {{"cnr_linear", r.cnr_linear.values},
                {"cnr_db", r.cnr_db.values},
                {"msr", r.msr.values},
                {"tp", r.tp.values},
                {"ep", r.ep.values}}}};
}

json to_json(const EvaluationReport& report) {
  json rows = json::array();
  for (const auto& row : report.rows) {
    json j{{"method", row.method},
           {"cnr_linear", row.cnr_linear.mean},
           {"cnr_linear_std", row.cnr_linear.stddev},
           {"cnr_db", row.cnr_db},
           {"cnr_db_image_mean", row.cnr_db_images.mean},
           {"cnr_db_image_std", row.cnr_db_images.stddev},
           {"msr", row.msr.mean},
           {"msr_std", row.msr.stddev},
           {"tp", row.tp.mean},
           {"tp_std", row.tp.stddev},
           {"ep", row.ep.mean},
           {"ep_std", row.ep.stddev}};
    if (row.psnr) {
      j["psnr"] = row.psnr->mean;
      j["psnr_std"] = row.psnr->stddev;
    }
    rows.push_back(std::move(j));
  }
  json images = json::array();
  for (const auto& img : report.images) {
    json j{{"name", img.name}, {"noisy", to_json(img.noisy)}, {"denoised", to_json(img.denoised)}};
    if (img.psnr_noisy) j["noisy"]["psnr"] = *img.psnr_noisy;
    if (img.psnr_denoised) j["denoised"]["psnr"] = *img.psnr_denoised;
    images.push_back(std::move(j));
  }
  return json{{"rows", std::move(rows)},
              {"images", std::move(images)},
              {"notes",
               {{"cnr_db", "10*log10(cnr_linear); row values use the mean linear CNR"},
                {"std", "population standard deviation across images or ROIs"}}}};
}

std::string format_table(const EvaluationReport& report) {
  const bool psnr = !report.rows.empty() && report.rows.front().psnr.has_value();
  std::vector<std::vector<std::string>> table;
  table.push_back({"method", "CNR", "CNR(dB)", "MSR", "TP", "EP"});
  if (psnr) table.front().push_back("PSNR(dB)");
  for (const auto& row : report.rows) {
    table.push_back({row.method, cell(row.cnr_linear), cell(row.cnr_db), cell(row.msr),
                     cell(row.tp), cell(row.ep)});
    if (psnr) table.back().push_back(row.psnr ? cell(*row.psnr) : "-");
  }
  std::vector<std::size_t> widths(table.front().size(), 0);
  for (const auto& line : table) {
    for (std::size_t i = 0; i < line.size(); ++i) widths[i] = std::max(widths[i], line[i].size());
  }
  std::ostringstream out;
  for (const auto& line : table) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i > 0) out << "  ";
      out << line[i];
      if (i + 1 < line.size()) out << std::string(widths[i] - line[i].size(), ' ');
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace ccd
