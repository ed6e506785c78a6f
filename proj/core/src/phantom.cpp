#include "ccd/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "ccd/random.hpp"

namespace ccd {

namespace fs = std::filesystem;

namespace {

constexpr double kVitreous = 0.1;
constexpr double kChoroid = 0.2;
constexpr double kFirstBright = 0.85;
constexpr double kBright = 0.7;
constexpr double kDark = 0.3;
constexpr int kSuper = 4;  // supersampling per axis

struct Wave {
  double amp = 0.0;
  double freq = 0.0;  // radians per pixel
  double phase = 0.0;
  double at(double x) const { return amp * std::sin(freq * x + phase); }
};

struct Blob {
  double row, col, sigma, amp;
};

struct Geometry {
  double top = 0.0;
  Wave shared;
  std::vector<double> offsets;  // boundary k sits at top + offsets[k] + shared + own[k]
  std::vector<Wave> own;
  std::vector<double> level;    // intensity of layer k
  std::vector<Blob> blobs;
  int gap_layer = -1;
  double gap_begin = 0.0, gap_end = 0.0;
};

Geometry draw_geometry(const PhantomConfig& cfg, Rng& rng) {
  const double s = cfg.height / 64.0;
  const double two_pi = 2.0 * std::numbers::pi;
  Geometry g;
  g.top = 0.25 * cfg.height + rng.uniform(-0.5, 0.5) * s;
  g.shared = {rng.uniform(0.5, 1.0) * s, two_pi * rng.uniform(0.75, 1.5) / cfg.width,
              rng.uniform(0.0, two_pi)};

  const int n = cfg.num_layers;
  const double span = 0.55 * cfg.height;
  const double weight_sum = 1.6 + (n - 1);
  double depth = 0.0;
  g.offsets.push_back(0.0);
  g.own.push_back({});
  for (int k = 0; k < n; ++k) {
    const double w = (k == 0 ? 1.6 : 1.0) / weight_sum;
    depth += span * w * rng.uniform(0.92, 1.08);
    g.offsets.push_back(depth);
    g.own.push_back({rng.uniform(0.0, 0.4) * s, two_pi * rng.uniform(1.0, 2.5) / cfg.width,
                     rng.uniform(0.0, two_pi)});
  }
  for (int k = 0; k < n; ++k) {
    const double base = (k % 2 == 1) ? kDark : (k == 0 ? kFirstBright : kBright);
    g.level.push_back(base + rng.uniform(-0.03, 0.03));
  }

  if (cfg.class_label == 1) {
    std::vector<int> dark;
    for (int k = 1; k < n; k += 2) dark.push_back(k);
    const int count = 3 + static_cast<int>(rng.below(3));
    for (int b = 0; b < count; ++b) {
      const int k = dark[rng.below(dark.size())];
      const double mid = 0.5 * (g.offsets[k] + g.offsets[k + 1]);
      g.blobs.push_back({g.top + mid, rng.uniform(0.1, 0.9) * cfg.width,
                         rng.uniform(1.5, 2.5) * s, rng.uniform(0.5, 0.6)});
    }
  } else if (cfg.class_label == 2) {
    g.gap_layer = std::min(2, n - 1);
    const double len = rng.uniform(0.3, 0.45) * cfg.width;
    g.gap_begin = rng.uniform(0.05 * cfg.width, 0.95 * cfg.width - len);
    g.gap_end = g.gap_begin + len;
  }
  return g;
}

double clean_value(const Geometry& g, int num_layers, double y, double x) {
  const double shared = g.top + g.shared.at(x);
  if (y < shared) return kVitreous;
  for (int k = 0; k < num_layers; ++k) {
    const double lower = shared + g.offsets[k + 1] + g.own[k + 1].at(x);
    if (y < lower) {
      if (k == g.gap_layer && x >= g.gap_begin && x < g.gap_end) {
        // A disrupted band keeps only its upper third.
        const double upper = shared + g.offsets[k] + g.own[k].at(x);
        if (y >= upper + (lower - upper) / 3.0) return kDark;
      }
      return g.level[k];
    }
  }
  return kChoroid;
}

}  // namespace

void PhantomConfig::validate() const {
  if (height < 16 || width < 16 || height % 8 != 0 || width % 8 != 0) {
    throw Error("phantom size must be a multiple of 8 and at least 16, got " +
                std::to_string(height) + "x" + std::to_string(width));
  }
  if (num_layers < 2 || num_layers > 12) throw Error("phantom num_layers must be in [2, 12]");
  if (class_label < 0 || class_label > 2) throw Error("phantom class_label must be 0, 1 or 2");
  if (!(speckle_looks > 0.0) || !std::isfinite(speckle_looks)) {
    throw Error("speckle_looks must be positive");
  }
}

Phantom generate(const PhantomConfig& cfg) {
  cfg.validate();
  Rng shape_rng(derive_seed(cfg.seed, 0));
  const Geometry g = draw_geometry(cfg, shape_rng);

  ImageTensor clean(cfg.height, cfg.width);
  for (int r = 0; r < cfg.height; ++r) {
    for (int c = 0; c < cfg.width; ++c) {
      double sum = 0.0;
      for (int i = 0; i < kSuper; ++i) {
        for (int j = 0; j < kSuper; ++j) {
          sum += clean_value(g, cfg.num_layers, r + (i + 0.5) / kSuper, c + (j + 0.5) / kSuper);
        }
      }
      double v = sum / (kSuper * kSuper);
      for (const auto& b : g.blobs) {
        const double d2 = (r + 0.5 - b.row) * (r + 0.5 - b.row) + (c + 0.5 - b.col) * (c + 0.5 - b.col);
        v += b.amp * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
      }
      clean(r, c) = std::clamp(v, 0.1, 0.9);
    }
  }

  Rng speckle_rng(derive_seed(cfg.seed, 1));
  ImageTensor noisy(cfg.height, cfg.width);
  const double looks = cfg.speckle_looks;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    noisy.data()[i] = std::clamp(clean.data()[i] * speckle_rng.gamma(looks, 1.0 / looks), 0.0, 1.0);
  }
  return {std::move(clean), std::move(noisy), cfg.class_label};
}

std::vector<Roi> phantom_rois(int height, int width) {
  auto row = [height](double f) { return static_cast<int>(std::lround(f * height)); };
  auto col = [width](double f) { return static_cast<int>(std::lround(f * width)); };
  // The edge window needs three rows for the Laplacian even on small images.
  const int edge_top = row(0.19);
  return {
      {"layer1", RoiPurpose::foreground, row(0.28), col(0.125), row(0.36), col(0.875)},
      {"vitreous", RoiPurpose::background, row(0.05), col(0.125), row(0.19), col(0.875)},
      {"retina", RoiPurpose::texture, row(0.28), col(0.25), row(0.66), col(0.75)},
      {"top_edge", RoiPurpose::edge, edge_top, col(0.125), std::max(row(0.33), edge_top + 3), col(0.875)},
  };
}

std::string phantom_name(int label, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%d_%04d", label, index);
  return buf;
}

DatasetManifest generate_manifest(int n_per_class, const PhantomConfig& base, const fs::path& out_dir) {
  if (n_per_class < 1) throw Error("n_per_class must be at least 1");
  base.validate();
  std::error_code ec;
  for (const char* sub : {"noisy", "clean"}) {
    fs::create_directories(out_dir / sub, ec);
    if (ec) throw Error("cannot create " + (out_dir / sub).string() + ": " + ec.message());
  }
  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  for (int label = 0; label < 3; ++label) {
    for (int i = 0; i < n_per_class; ++i) {
      PhantomConfig cfg = base;
      cfg.class_label = label;
      cfg.seed = derive_seed(base.seed, static_cast<std::uint64_t>(label), static_cast<std::uint64_t>(i));
      const Phantom p = generate(cfg);
      const std::string file = phantom_name(label, i) + ".pgm";
      save_image(p.noisy, out_dir / "noisy" / file);
      save_image(p.clean, out_dir / "clean" / file);
      manifest.records.push_back({"noisy/" + file, label, phantom_name(label, i)});
    }
  }
  save_manifest(manifest, out_dir / "manifest.json");
  const auto rois = phantom_rois(base.height, base.width);
  save_rois(rois, out_dir / "rois.json");
  return manifest;
}

}  // namespace ccd
