#include "ccd/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

namespace ccd {

namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "CCDCKPT\n";

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint64_t get_u64(std::string_view bytes, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[pos + i]);
  return v;
}

json spec_table(const std::vector<ParamSpec>& specs) {
  json table = json::array();
  for (const auto& s : specs) {
    table.push_back({{"name", s.name}, {"offset", s.offset}, {"shape", s.shape}});
  }
  return table;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const char* what) {
  if (!j.is_object()) throw Error(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw Error(std::string("unknown key '") + key + "' in " + what);
  }
}

}  // namespace

json to_json(const NetConfig& c) {
  return {{"levels", c.levels},           {"base_channels", c.base_channels},
          {"aspp_rates", c.aspp_rates},   {"num_classes", c.num_classes},
          {"input_size", {c.height, c.width}}};
}

NetConfig net_config_from_json(const json& j) {
  check_keys(j, {"levels", "base_channels", "aspp_rates", "num_classes", "input_size"}, "net config");
  NetConfig c;
  try {
    if (j.contains("levels")) c.levels = j.at("levels").get<int>();
    if (j.contains("base_channels")) c.base_channels = j.at("base_channels").get<int>();
    if (j.contains("aspp_rates")) c.aspp_rates = j.at("aspp_rates").get<std::vector<int>>();
    if (j.contains("num_classes")) c.num_classes = j.at("num_classes").get<int>();
    if (j.contains("input_size")) {
      auto size = j.at("input_size").get<std::vector<int>>();
      if (size.size() != 2) throw Error("input_size must be [height, width]");
      c.height = size[0];
      c.width = size[1];
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed net config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string serialize_checkpoint(const ModelParams& params) {
  ParamLayout layout(params.config);
  if (params.values.size() != layout.param_count() ||
      params.buffers.size() != layout.buffer_count()) {
    throw Error("serialize_checkpoint: storage does not match config");
  }
  json header{{"format_version", kCheckpointVersion},
              {"config", to_json(params.config)},
              {"params", spec_table(layout.params())},
              {"buffers", spec_table(layout.buffers())},
              {"param_count", layout.param_count()},
              {"buffer_count", layout.buffer_count()}};
  const std::string text = header.dump();
  std::string out(kMagic);
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + 8 * (params.values.size() + params.buffers.size()));
  for (const auto* vec : {&params.values, &params.buffers}) {
    for (double v : *vec) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

ModelParams deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 8) != kMagic) throw Error("not a checkpoint file");
  const std::uint64_t header_len = get_u64(bytes, 8);
  if (bytes.size() < 16 + header_len) throw Error("truncated checkpoint header");
  json header;
  try {
    header = json::parse(bytes.substr(16, header_len));
  } catch (const json::exception& e) {
    throw Error(std::string("malformed checkpoint header: ") + e.what());
  }
  if (header.value("format_version", 0) != kCheckpointVersion) {
    throw Error("unsupported checkpoint format version");
  }
  ModelParams params;
  params.config = net_config_from_json(header.at("config"));
  ParamLayout layout(params.config);
  if (header.at("param_count").get<std::size_t>() != layout.param_count() ||
      header.at("buffer_count").get<std::size_t>() != layout.buffer_count()) {
    throw Error("checkpoint parameter table does not match its config");
  }
  const std::size_t n_params = layout.param_count();
  const std::size_t n_buffers = layout.buffer_count();
  std::size_t pos = 16 + header_len;
  if (bytes.size() != pos + 8 * (n_params + n_buffers)) throw Error("checkpoint payload size mismatch");
  params.values.resize(n_params);
  params.buffers.resize(n_buffers);
  for (auto* vec : {&params.values, &params.buffers}) {
    for (double& v : *vec) {
      v = std::bit_cast<double>(get_u64(bytes, pos));
      if (!std::isfinite(v)) throw Error("checkpoint contains non-finite values");
      pos += 8;
    }
  }
  return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize_checkpoint(bytes);
}

}  // namespace ccd
