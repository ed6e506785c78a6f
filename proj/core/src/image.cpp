#include "ccd/image.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ccd {

namespace fs = std::filesystem;
using nlohmann::json;

ImageTensor::ImageTensor(int height, int width, double fill)
    : ImageTensor(height, width,
                  std::vector<double>(static_cast<std::size_t>(std::max(height, 0)) *
                                          static_cast<std::size_t>(std::max(width, 0)),
                                      fill)) {}

ImageTensor::ImageTensor(int height, int width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height <= 0 || width <= 0) {
    throw Error("image shape must be positive, got " + std::to_string(height) + "x" +
                std::to_string(width));
  }
  if (data_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw Error("image data length does not match shape");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw Error("non-finite intensity");
  }
}

std::string_view to_string(RoiPurpose purpose) {
  switch (purpose) {
    case RoiPurpose::foreground: return "foreground";
    case RoiPurpose::background: return "background";
    case RoiPurpose::texture: return "texture";
    case RoiPurpose::edge: return "edge";
  }
  return "foreground";
}

RoiPurpose parse_roi_purpose(std::string_view text) {
  if (text == "foreground") return RoiPurpose::foreground;
  if (text == "background") return RoiPurpose::background;
  if (text == "texture") return RoiPurpose::texture;
  if (text == "edge") return RoiPurpose::edge;
  throw Error("unknown ROI purpose '" + std::string(text) + "'");
}

void Roi::check_within(int height, int width) const {
  if (top < 0 || left < 0 || bottom > height || right > width || top >= bottom ||
      left >= right) {
    std::ostringstream msg;
    msg << "ROI '" << name << "' [" << top << "," << bottom << ")x[" << left << "," << right
        << ") out of bounds for " << height << "x" << width << " image";
    throw Error(msg.str());
  }
  if (area() < 2) throw Error("ROI '" + name + "' has fewer than 2 pixels");
}

Roi full_roi(const ImageTensor& img, RoiPurpose purpose) {
  return Roi{"full", purpose, 0, 0, img.height(), img.width()};
}

fs::path DatasetManifest::resolve(const ManifestRecord& record) const {
  fs::path p(record.path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

void DatasetManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (r.label < 0 || r.label > 2) {
      throw Error("manifest label " + std::to_string(r.label) + " outside {0,1,2} for " + r.path);
    }
    if (!seen.insert(r.path).second) throw Error("duplicate manifest path " + r.path);
  }
}

namespace {

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext;
}

std::vector<char> read_bytes(const fs::path& path) {
  if (fs::is_directory(path)) throw Error("cannot read directory " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const std::string& bytes) {
  if (fs::is_directory(path)) throw Error("cannot write image to directory " + path.string());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

// Reads the next PGM header token, skipping whitespace and '#' comments.
std::string pgm_token(const std::vector<char>& bytes, std::size_t& pos) {
  for (;;) {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  return {bytes.begin() + static_cast<std::ptrdiff_t>(start),
          bytes.begin() + static_cast<std::ptrdiff_t>(pos)};
}

int parse_positive(const std::string& token, const fs::path& path) {
  try {
    std::size_t used = 0;
    int v = std::stoi(token, &used);
    if (used != token.size() || v <= 0) throw Error("");
    return v;
  } catch (const std::exception&) {
    throw Error("malformed PGM header in " + path.string());
  }
}

ImageTensor load_pgm(const fs::path& path) {
  auto bytes = read_bytes(path);
  std::size_t pos = 0;
  if (pgm_token(bytes, pos) != "P5") throw Error("unsupported format: " + path.string() + " is not binary PGM (P5)");
  int width = parse_positive(pgm_token(bytes, pos), path);
  int height = parse_positive(pgm_token(bytes, pos), path);
  int maxval = parse_positive(pgm_token(bytes, pos), path);
  if (maxval != 255) throw Error("unsupported format: only 8-bit PGM (maxval 255) is supported");
  ++pos;  // single whitespace after maxval
  std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() < pos + n) throw Error("truncated PGM data in " + path.string());
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = static_cast<unsigned char>(bytes[pos + i]) / 255.0;
  }
  return ImageTensor(height, width, std::move(data));
}

void save_pgm(const ImageTensor& img, const fs::path& path) {
  std::ostringstream out;
  out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  std::string bytes = out.str();
  bytes.reserve(bytes.size() + img.size());
  for (double v : img.data()) {
    double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    bytes.push_back(static_cast<char>(static_cast<unsigned char>(q)));
  }
  write_bytes(path, bytes);
}

std::uint32_t load_le32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

ImageTensor load_raw(const fs::path& path) {
  auto sidecar = raw_sidecar_path(path);
  auto header_bytes = read_bytes(sidecar);
  json header;
  try {
    header = json::parse(header_bytes.begin(), header_bytes.end());
  } catch (const json::exception& e) {
    throw Error("malformed raw sidecar " + sidecar.string() + ": " + e.what());
  }
  if (!header.is_object() || !header.contains("height") || !header.contains("width")) {
    throw Error("raw sidecar " + sidecar.string() + " needs height and width");
  }
  int height = header.at("height").get<int>();
  int width = header.at("width").get<int>();
  if (height <= 0 || width <= 0) throw Error("raw sidecar shape must be positive");
  auto bytes = read_bytes(path);
  std::size_t n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  if (bytes.size() != n * 4) throw Error("raw file size does not match sidecar shape: " + path.string());
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    float f = std::bit_cast<float>(load_le32(bytes.data() + 4 * i));
    if (!std::isfinite(f)) throw Error("non-finite intensity in " + path.string());
    if (f < 0.0f || f > 1.0f) throw Error("intensity outside [0,1] in " + path.string());
    data[i] = f;
  }
  return ImageTensor(height, width, std::move(data));
}

void save_raw(const ImageTensor& img, const fs::path& path) {
  std::string bytes;
  bytes.reserve(img.size() * 4);
  for (double v : img.data()) {
    auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
  }
  write_bytes(path, bytes);
  json header{{"height", img.height()}, {"width", img.width()}};
  write_bytes(raw_sidecar_path(path), header.dump() + "\n");
}

json read_json(const fs::path& path) {
  auto bytes = read_bytes(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw Error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace

fs::path raw_sidecar_path(const fs::path& raw_path) {
  return fs::path(raw_path.string() + ".json");
}

bool is_supported_image(const fs::path& path) {
  auto ext = lower_extension(path);
  return ext == ".pgm" || ext == ".raw";
}

ImageTensor load_image(const fs::path& path) {
  auto ext = lower_extension(path);
  if (ext == ".pgm") return load_pgm(path);
  if (ext == ".raw") return load_raw(path);
  throw Error("unsupported format: " + path.string());
}

void save_image(const ImageTensor& img, const fs::path& path) {
  if (img.empty()) throw Error("cannot save an empty image");
  auto ext = lower_extension(path);
  if (fs::is_directory(path)) throw Error("cannot write image to directory " + path.string());
  if (ext == ".pgm") return save_pgm(img, path);
  if (ext == ".raw") return save_raw(img, path);
  throw Error("unsupported format: " + path.string());
}

ImageTensor crop(const ImageTensor& img, const Roi& roi) {
  roi.check_within(img.height(), img.width());
  ImageTensor out(roi.rows(), roi.cols());
  for (int r = 0; r < roi.rows(); ++r) {
    for (int c = 0; c < roi.cols(); ++c) out(r, c) = img(roi.top + r, roi.left + c);
  }
  return out;
}

DatasetManifest load_manifest(const fs::path& path) {
  json doc = read_json(path);
  if (!doc.is_array()) throw Error("manifest must be a JSON array: " + path.string());
  DatasetManifest manifest;
  manifest.base_dir = path.parent_path();
  for (const auto& item : doc) {
    try {
      manifest.records.push_back(ManifestRecord{item.at("path").get<std::string>(),
                                                item.at("label").get<int>(),
                                                item.at("subject").get<std::string>()});
    } catch (const json::exception& e) {
      throw Error("malformed manifest record in " + path.string() + ": " + e.what());
    }
  }
  manifest.validate();
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  manifest.validate();
  json doc = json::array();
  for (const auto& r : manifest.records) {
    doc.push_back({{"path", r.path}, {"label", r.label}, {"subject", r.subject}});
  }
  write_bytes(path, doc.dump(2) + "\n");
}

std::vector<Roi> load_rois(const fs::path& path) {
  json doc = read_json(path);
  if (!doc.is_array()) throw Error("ROI file must be a JSON array: " + path.string());
  std::vector<Roi> rois;
  for (const auto& item : doc) {
    try {
      rois.push_back(Roi{item.at("name").get<std::string>(),
                         parse_roi_purpose(item.at("purpose").get<std::string>()),
                         item.at("top").get<int>(), item.at("left").get<int>(),
                         item.at("bottom").get<int>(), item.at("right").get<int>()});
    } catch (const json::exception& e) {
      throw Error("malformed ROI record in " + path.string() + ": " + e.what());
    }
  }
  return rois;
}

void save_rois(std::span<const Roi> rois, const fs::path& path) {
  json doc = json::array();
  for (const auto& r : rois) {
    doc.push_back({{"name", r.name},
                   {"purpose", std::string(to_string(r.purpose))},
                   {"top", r.top},
                   {"left", r.left},
                   {"bottom", r.bottom},
                   {"right", r.right}});
  }
  write_bytes(path, doc.dump(2) + "\n");
}

}  // namespace ccd
