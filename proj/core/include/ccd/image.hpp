#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccd/error.hpp"

namespace ccd {

/// Single-channel raster, row-major, every value finite.
///
/// Intensities loaded from disk or produced by the network lie in [0,1];
/// intermediate images (filled blind spots, test fixtures) only need to be
/// finite.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int height, int width, double fill = 0.0);
  ImageTensor(int height, int width, std::vector<double> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double operator()(int row, int col) const noexcept {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }
  double& operator()(int row, int col) noexcept {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  bool same_shape(const ImageTensor& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

enum class RoiPurpose { foreground, background, texture, edge };

std::string_view to_string(RoiPurpose purpose);
RoiPurpose parse_roi_purpose(std::string_view text);

/// Rectangle with inclusive top/left and exclusive bottom/right.
struct Roi {
  std::string name;
  RoiPurpose purpose = RoiPurpose::foreground;
  int top = 0;
  int left = 0;
  int bottom = 0;
  int right = 0;

  int rows() const noexcept { return bottom - top; }
  int cols() const noexcept { return right - left; }
  long area() const noexcept { return static_cast<long>(rows()) * cols(); }

  /// Throws unless the rectangle is non-empty, holds at least two pixels and
  /// fits inside a height x width image.
  void check_within(int height, int width) const;

  friend bool operator==(const Roi&, const Roi&) = default;
};

Roi full_roi(const ImageTensor& img, RoiPurpose purpose = RoiPurpose::foreground);

struct ManifestRecord {
  std::string path;
  int label = 0;
  std::string subject;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

/// Dataset listing. Relative record paths resolve against base_dir.
struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const ManifestRecord& record) const;
  void validate() const;
};

ImageTensor load_image(const std::filesystem::path& path);
void save_image(const ImageTensor& img, const std::filesystem::path& path);

/// Sidecar holding the raster shape of a .raw file: "<file>.raw.json".
std::filesystem::path raw_sidecar_path(const std::filesystem::path& raw_path);

bool is_supported_image(const std::filesystem::path& path);

ImageTensor crop(const ImageTensor& img, const Roi& roi);

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

std::vector<Roi> load_rois(const std::filesystem::path& path);
void save_rois(std::span<const Roi> rois, const std::filesystem::path& path);

}  // namespace ccd
