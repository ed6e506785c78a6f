// ccd: phantom generation, dual-predictor training, denoising and evaluation.
//
// Exit codes: 0 success, 1 runtime or data failure, 2 usage error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ccd/classification.hpp"
#include "ccd/config.hpp"
#include "ccd/parallel.hpp"
#include "ccd/phantom.hpp"
#include "ccd/report.hpp"
#include "ccd/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Semantic flag errors found after parsing.
struct UsageError : ccd::Error {
  using ccd::Error::Error;
};

std::pair<int, int> parse_size(const std::string& text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t used_h = 0;
    std::size_t used_w = 0;
    const int h = std::stoi(text.substr(0, x), &used_h);
    const int w = std::stoi(text.substr(x + 1), &used_w);
    if (used_h != x || used_w != text.size() - x - 1) throw std::invalid_argument(text);
    return {h, w};
  } catch (const std::logic_error&) {
    throw UsageError("--size expects HxW, got '" + text + "'");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ccd::Error("cannot write " + path.string());
  out << text;
  if (!out) throw ccd::Error("write failed for " + path.string());
}

// Supported images directly inside `dir`, keyed by file name.
std::map<std::string, fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ccd::Error(dir.string() + " is not a directory");
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && ccd::is_supported_image(entry.path())) {
      out.emplace(entry.path().filename().string(), entry.path());
    }
  }
  return out;
}

struct PhantomArgs {
  fs::path out;
  int per_class = 0;
  std::uint64_t seed = 0;
  std::string size = "64x64";
  double looks = 4.0;
  int layers = 5;
};

int cmd_phantom_gen(const PhantomArgs& a) {
  ccd::PhantomConfig cfg;
  std::tie(cfg.height, cfg.width) = parse_size(a.size);
  cfg.speckle_looks = a.looks;
  cfg.num_layers = a.layers;
  cfg.seed = a.seed;
  try {
    cfg.validate();
  } catch (const ccd::Error& e) {
    throw UsageError(e.what());
  }
  ccd::generate_manifest(a.per_class, cfg, a.out);
  std::cout << (a.out / "manifest.json").string() << "\n";
  return 0;
}

struct TrainArgs {
  std::optional<fs::path> manifest;
  std::optional<fs::path> config;
  std::optional<fs::path> out;
};

int cmd_train(const TrainArgs& a) {
  ccd::RunConfig run;
  if (a.config) run = ccd::load_run_config(*a.config);
  if (a.manifest) run.manifest = *a.manifest;
  if (a.out) run.out = *a.out;
  if (!run.manifest) throw UsageError("train needs --manifest (or paths.manifest in the config)");
  if (!run.out) throw UsageError("train needs --out (or paths.out in the config)");
  if (!fs::is_regular_file(*run.manifest)) throw UsageError("manifest not found: " + run.manifest->string());

  const ccd::DatasetManifest manifest = ccd::load_manifest(*run.manifest);
  std::cerr << "training " << manifest.records.size() << " images, " << run.train.epochs
            << " epochs, " << ccd::worker_threads() << " worker thread(s)\n";
  const auto result = ccd::train_dual(manifest, run.net, run.train, [](const ccd::TrainingLogRow& row) {
    std::fprintf(stderr, "epoch %3d  %-4s  loss %.6f  lr %.3g\n", row.epoch, row.model.c_str(),
                 row.mean_loss, row.lr);
  });
  ccd::save_dual_model(result.model, *run.out);
  ccd::write_training_csv(result.log, *run.out / "training_log.csv");
  write_text(*run.out / "run_config.json", ccd::to_json(run).dump(2) + "\n");
  std::cout << (*run.out / "model.json").string() << "\n";
  return 0;
}

struct DenoiseArgs {
  fs::path model;
  fs::path in;
  fs::path out;
};

int cmd_denoise(const DenoiseArgs& a) {
  const ccd::DualModel model = ccd::load_dual_model(a.model);
  std::vector<fs::path> inputs;
  if (fs::is_directory(a.in)) {
    for (const auto& [name, path] : list_images(a.in)) inputs.push_back(path);
    if (inputs.empty()) throw ccd::Error("no .pgm or .raw images in " + a.in.string());
  } else {
    inputs.push_back(a.in);
  }
  fs::create_directories(a.out);
  ccd::parallel_for(inputs.size(), [&](std::size_t i) {
    const ccd::ImageTensor img = ccd::load_image(inputs[i]);
    try {
      ccd::save_image(ccd::denoise(model, img), a.out / inputs[i].filename());
    } catch (const ccd::Error& e) {
      throw ccd::Error(inputs[i].filename().string() + ": " + e.what());
    }
  });
  std::cout << "denoised " << inputs.size() << " image(s) into " << a.out.string() << "\n";
  return 0;
}

struct EvaluateArgs {
  fs::path noisy;
  fs::path denoised;
  fs::path rois;
  std::optional<fs::path> clean;
  fs::path report;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const ccd::RoiSet rois{ccd::load_rois(a.rois)};
  const auto noisy = list_images(a.noisy);
  const auto denoised = list_images(a.denoised);
  std::optional<std::map<std::string, fs::path>> clean;
  if (a.clean) clean = list_images(*a.clean);

  std::vector<std::string> unpaired;
  for (const auto& [name, path] : noisy) {
    if (!denoised.count(name)) unpaired.push_back(name + " (no denoised)");
  }
  for (const auto& [name, path] : denoised) {
    if (!noisy.count(name)) unpaired.push_back(name + " (no noisy)");
    else if (clean && !clean->count(name)) unpaired.push_back(name + " (no clean)");
  }
  if (!unpaired.empty()) {
    std::string msg = "unpaired files:";
    for (const auto& u : unpaired) msg += " " + u;
    throw ccd::Error(msg);
  }
  if (noisy.empty()) throw ccd::Error("no image pairs found");

  std::vector<ccd::EvaluationPair> pairs;
  for (const auto& [name, path] : noisy) {
    ccd::EvaluationPair p{name, ccd::load_image(path), ccd::load_image(denoised.at(name)), std::nullopt};
    if (clean) p.clean = ccd::load_image(clean->at(name));
    pairs.push_back(std::move(p));
  }
  const ccd::EvaluationReport report = ccd::evaluate(pairs, rois);
  write_text(a.report, ccd::to_json(report).dump(2) + "\n");
  std::cout << ccd::format_table(report);
  return 0;
}

struct ClassifyArgs {
  fs::path model;
  fs::path manifest;
  std::string head = "odd";
  std::optional<fs::path> json_out;
};

int cmd_classify_eval(const ClassifyArgs& a) {
  const ccd::DualModel model = ccd::load_dual_model(a.model);
  const ccd::DatasetManifest manifest = ccd::load_manifest(a.manifest);
  if (manifest.records.empty()) throw ccd::Error("manifest has no records");
  const ccd::Head head = a.head == "even" ? ccd::Head::even : ccd::Head::odd;
  const std::size_t n = manifest.records.size();
  std::vector<int> labels(n);
  std::vector<int> predictions(n);
  std::vector<std::string> subjects(n);
  ccd::parallel_for(n, [&](std::size_t i) {
    const auto& rec = manifest.records[i];
    labels[i] = rec.label;
    subjects[i] = rec.subject;
    try {
      predictions[i] = ccd::classify(model, ccd::load_image(manifest.resolve(rec)), head);
    } catch (const ccd::Error& e) {
      throw ccd::Error(rec.path + ": " + e.what());
    }
  });
  const auto report = ccd::evaluate_classification(labels, predictions, subjects,
                                                   model.odd_predictor.config.num_classes);
  std::cout << "head: " << a.head << " predictor\n" << ccd::format_classification(report);
  if (a.json_out) write_text(*a.json_out, ccd::to_json(report).dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Checkerboard blind-spot denoiser"};
  app.require_subcommand(1);

  PhantomArgs phantom;
  auto* gen = app.add_subcommand("phantom-gen", "Generate a labelled speckle phantom dataset");
  gen->add_option("--out", phantom.out, "Output directory")->required();
  gen->add_option("--per-class", phantom.per_class, "Images per class")->required()->check(CLI::Range(1, 1000000));
  gen->add_option("--seed", phantom.seed, "Base seed")->capture_default_str();
  gen->add_option("--size", phantom.size, "Image size HxW")->capture_default_str();
  gen->add_option("--looks", phantom.looks, "Speckle looks L (larger is cleaner)")
      ->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--layers", phantom.layers, "Number of retinal layers")->capture_default_str();

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "Train the odd and even predictors");
  tr->add_option("--manifest", train.manifest, "Dataset manifest JSON")->check(CLI::ExistingFile);
  tr->add_option("--config", train.config, "Run configuration JSON")->check(CLI::ExistingFile);
  tr->add_option("--out", train.out, "Model output directory");

  DenoiseArgs den;
  auto* dn = app.add_subcommand("denoise", "Denoise an image or a directory of images");
  dn->add_option("--model", den.model, "Model directory")->required()->check(CLI::ExistingDirectory);
  dn->add_option("--in", den.in, "Input image or directory")->required()->check(CLI::ExistingPath);
  dn->add_option("--out", den.out, "Output directory")->required();

  EvaluateArgs ev;
  auto* evc = app.add_subcommand("evaluate", "Score denoised images against their noisy inputs");
  evc->add_option("--noisy", ev.noisy, "Noisy image directory")->required()->check(CLI::ExistingDirectory);
  evc->add_option("--denoised", ev.denoised, "Denoised image directory")->required()->check(CLI::ExistingDirectory);
  evc->add_option("--rois", ev.rois, "ROI JSON")->required()->check(CLI::ExistingFile);
  evc->add_option("--clean", ev.clean, "Clean reference directory")->check(CLI::ExistingDirectory);
  evc->add_option("--report", ev.report, "Report JSON path")->required();

  ClassifyArgs cl;
  auto* cls = app.add_subcommand("classify-eval", "Score a classification head on a manifest");
  cls->add_option("--model", cl.model, "Model directory")->required()->check(CLI::ExistingDirectory);
  cls->add_option("--manifest", cl.manifest, "Dataset manifest JSON")->required()->check(CLI::ExistingFile);
  cls->add_option("--head", cl.head, "Predictor whose head classifies")
      ->check(CLI::IsMember({"odd", "even"}))->capture_default_str();
  cls->add_option("--json", cl.json_out, "Also write the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_phantom_gen(phantom);
    if (tr->parsed()) return cmd_train(train);
    if (dn->parsed()) return cmd_denoise(den);
    if (evc->parsed()) return cmd_evaluate(ev);
    if (cls->parsed()) return cmd_classify_eval(cl);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const ccd::TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
