#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ccd/image.hpp"

namespace ccd {

/// Layered retina-like phantom with multiplicative gamma speckle.
struct PhantomConfig {
  int height = 64;
  int width = 64;
  int num_layers = 5;
  int class_label = 0;         // 0 regular, 1 bright lesions, 2 disrupted band
  double speckle_looks = 4.0;  // gamma shape L; speckle has mean 1 and variance 1/L
  std::uint64_t seed = 0;

  /// H and W must be multiples of 8 (three 2x poolings) and at least 16.
  void validate() const;

  friend bool operator==(const PhantomConfig&, const PhantomConfig&) = default;
};

struct Phantom {
  ImageTensor clean;
  ImageTensor noisy;
  int label = 0;
};

Phantom generate(const PhantomConfig& config);

/// Fixed ROIs that hold for every phantom of this size regardless of class
/// and seed: a foreground strip inside the first bright layer, a vitreous
/// background, a multi-layer texture window and a band across the top edge.
std::vector<Roi> phantom_rois(int height, int width);

/// Writes noisy/ and clean/ PGM images, manifest.json and rois.json under
/// `out_dir`. Image (class k, index i) uses seed derive_seed(base.seed, k, i).
DatasetManifest generate_manifest(int n_per_class, const PhantomConfig& base,
                                  const std::filesystem::path& out_dir);

/// File stem of image (class k, index i), e.g. "c1_0007".
std::string phantom_name(int label, int index);

}  // namespace ccd
