#include "ccd/config.hpp"

#include <fstream>
#include <initializer_list>
#include <iterator>
#include <string_view>

#include "ccd/checkpoint.hpp"

namespace ccd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_object(const json& j, std::initializer_list<std::string_view> allowed, const std::string& what) {
  if (!j.is_object()) throw Error(what + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw Error("unknown key '" + key + "' in " + what);
  }
}

template <class T>
void read_if(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

std::string_view to_string(LossPositions p) {
  return p == LossPositions::blinded_only ? "blinded_only" : "full_image";
}

LossPositions parse_loss_positions(const std::string& text) {
  if (text == "blinded_only") return LossPositions::blinded_only;
  if (text == "full_image") return LossPositions::full_image;
  throw Error("loss_positions must be 'blinded_only' or 'full_image'");
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

json to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"lr_milestones", c.lr_milestones},
              {"lr_gamma", c.lr_gamma},
              {"loss_weights", {{"w_r", c.loss_weights.w_r}, {"w_c", c.loss_weights.w_c}}},
              {"loss_positions", to_string(c.loss_positions)},
              {"seed", c.seed},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"adam_eps", c.adam_eps}};
}

TrainConfig train_config_from_json(const json& j) {
  check_object(j,
               {"epochs", "batch_size", "lr", "lr_milestones", "lr_gamma", "loss_weights",
                "loss_positions", "seed", "adam_beta1", "adam_beta2", "adam_eps"},
               "train config");
  TrainConfig c;
  try {
    read_if(j, "epochs", c.epochs);
    // Changing the epoch count without naming milestones rescales them.
    if (j.contains("lr_milestones")) c.lr_milestones = j.at("lr_milestones").get<std::vector<int>>();
    else if (j.contains("epochs")) c.lr_milestones = TrainConfig::default_milestones(c.epochs);
    read_if(j, "batch_size", c.batch_size);
    read_if(j, "lr", c.lr);
    read_if(j, "lr_gamma", c.lr_gamma);
    if (j.contains("loss_weights")) {
      const json& w = j.at("loss_weights");
      check_object(w, {"w_r", "w_c"}, "loss_weights");
      read_if(w, "w_r", c.loss_weights.w_r);
      read_if(w, "w_c", c.loss_weights.w_c);
    }
    if (j.contains("loss_positions")) {
      c.loss_positions = parse_loss_positions(j.at("loss_positions").get<std::string>());
    }
    read_if(j, "seed", c.seed);
    read_if(j, "adam_beta1", c.adam_beta1);
    read_if(j, "adam_beta2", c.adam_beta2);
    read_if(j, "adam_eps", c.adam_eps);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed train config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const PhantomConfig& c) {
  return json{{"size", {c.height, c.width}},
              {"num_layers", c.num_layers},
              {"class_label", c.class_label},
              {"speckle_looks", c.speckle_looks},
              {"seed", c.seed}};
}

PhantomConfig phantom_config_from_json(const json& j) {
  check_object(j, {"size", "num_layers", "class_label", "speckle_looks", "seed"}, "phantom config");
  PhantomConfig c;
  try {
    if (j.contains("size")) {
      auto size = j.at("size").get<std::vector<int>>();
      if (size.size() != 2) throw Error("phantom size must be [height, width]");
      c.height = size[0];
      c.width = size[1];
    }
    read_if(j, "num_layers", c.num_layers);
    read_if(j, "class_label", c.class_label);
    read_if(j, "speckle_looks", c.speckle_looks);
    read_if(j, "seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed phantom config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  json j{{"net", to_json(c.net)}, {"train", to_json(c.train)}, {"phantom", to_json(c.phantom)}};
  json paths = json::object();
  if (c.manifest) paths["manifest"] = c.manifest->string();
  if (c.out) paths["out"] = c.out->string();
  j["paths"] = std::move(paths);
  return j;
}

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  check_object(j, {"net", "train", "phantom", "paths"}, "run config");
  RunConfig c;
  if (j.contains("net")) c.net = net_config_from_json(j.at("net"));
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  if (j.contains("phantom")) c.phantom = phantom_config_from_json(j.at("phantom"));
  if (j.contains("paths")) {
    const json& p = j.at("paths");
    check_object(p, {"manifest", "out"}, "paths");
    try {
      if (p.contains("manifest")) c.manifest = resolve(base_dir, p.at("manifest").get<std::string>());
      if (p.contains("out")) c.out = resolve(base_dir, p.at("out").get<std::string>());
    } catch (const json::exception& e) {
      throw Error(std::string("malformed paths: ") + e.what());
    }
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()));
  } catch (const json::exception& e) {
    throw Error("malformed config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

}  // namespace ccd
