#include "ccd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <mutex>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "ccd/checkpoint.hpp"
#include "ccd/parallel.hpp"
#include "ccd/random.hpp"

namespace ccd {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 0) throw Error("TrainConfig: epochs must be >= 0");
  if (batch_size < 1) throw Error("TrainConfig: batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw Error("TrainConfig: lr must be positive");
  if (!(lr_gamma > 0.0 && lr_gamma <= 1.0)) throw Error("TrainConfig: lr_gamma must be in (0,1]");
  for (std::size_t i = 0; i < lr_milestones.size(); ++i) {
    if (lr_milestones[i] < 0 || lr_milestones[i] >= std::max(epochs, 1) ||
        (i > 0 && lr_milestones[i] <= lr_milestones[i - 1])) {
      throw Error("TrainConfig: milestones must be strictly increasing and below epochs");
    }
  }
  if (epochs == 0 && !lr_milestones.empty()) {
    throw Error("TrainConfig: milestones must be below epochs");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw Error("TrainConfig: Adam betas must lie in [0,1)");
  }
  if (!(adam_eps > 0.0)) throw Error("TrainConfig: adam_eps must be positive");
  loss_weights.validate();
}

std::vector<int> TrainConfig::default_milestones(int epochs) {
  std::vector<int> out;
  for (double frac : {0.60, 0.85}) {
    const int m = static_cast<int>(std::floor(frac * epochs + 0.5));
    if (m > 0 && m < epochs && (out.empty() || m > out.back())) out.push_back(m);
  }
  return out;
}

void adam_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
               double lr, const AdamSettings& s) {
  if (params.size() != grads.size()) throw Error("adam_step: gradient size mismatch");
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error("adam_step: optimizer state size mismatch");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw Error("adam_step: non-finite gradient");
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = s.beta1 * state.m[i] + (1.0 - s.beta1) * g;
    state.v[i] = s.beta2 * state.v[i] + (1.0 - s.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

double lr_at(int epoch, const TrainConfig& config) {
  const auto passed = std::count_if(config.lr_milestones.begin(), config.lr_milestones.end(),
                                    [epoch](int m) { return m <= epoch; });
  return config.lr * std::pow(config.lr_gamma, static_cast<double>(passed));
}

BatchGradient batch_gradient(const ModelParams& model, std::span<const TrainingSample> batch,
                             Parity blind_parity, const TrainConfig& config) {
  if (batch.empty()) throw Error("batch_gradient: empty batch");
  const NetConfig& net = model.config;
  std::vector<ImageTensor> inputs;
  inputs.reserve(batch.size());
  for (const auto& s : batch) {
    if (s.image.height() != net.height || s.image.width() != net.width) {
      throw Error("training image shape does not match the model input size");
    }
    inputs.push_back(make_blind(s.image, blind_parity).image);
  }

  ForwardOutput out = forward(model, to_batch(inputs), Mode::train);

  std::optional<std::vector<Pixel>> positions;
  if (config.loss_positions == LossPositions::blinded_only) {
    positions = blinded_positions(net.height, net.width, blind_parity);
  }
  std::optional<std::span<const Pixel>> position_span;
  if (positions) position_span = std::span<const Pixel>(*positions);

  const int n = static_cast<int>(batch.size());
  const double inv_n = 1.0 / n;
  Tensor d_denoised(n, 1, net.height, net.width);
  std::vector<double> d_logits(static_cast<std::size_t>(n) * net.num_classes);

  BatchGradient result;
  for (int i = 0; i < n; ++i) {
    auto logits = out.logits_of(i);
    CompositeLoss loss = composite_loss(out.image(i), batch[i].image, position_span, logits,
                                        batch[i].label, config.loss_weights);
    result.loss += loss.value * inv_n;
    auto dst = d_denoised.channel(i, 0);
    auto src = loss.d_pred.data();
    for (std::size_t p = 0; p < src.size(); ++p) dst[p] = src[p] * inv_n;
    for (int k = 0; k < net.num_classes; ++k) {
      d_logits[static_cast<std::size_t>(i) * net.num_classes + k] = loss.d_logits[k] * inv_n;
    }
    result.d_pred.push_back(std::move(loss.d_pred));
  }
  result.grads = backward(model, out.cache, d_denoised, d_logits);
  result.cache = std::move(out.cache);
  return result;
}

double train_step(ModelParams& model, OptimizerState& opt, std::span<const TrainingSample> batch,
                  Parity blind_parity, const TrainConfig& config, double lr) {
  BatchGradient bg = batch_gradient(model, batch, blind_parity, config);
  if (!std::isfinite(bg.loss)) throw TrainingDiverged("non-finite training loss");
  commit_batch_statistics(model, bg.cache);
  adam_step(model.values, bg.grads, opt, lr,
            AdamSettings{config.adam_beta1, config.adam_beta2, config.adam_eps});
  return bg.loss;
}

namespace {

struct PredictorRun {
  ModelParams params;
  std::vector<TrainingLogRow> log;
};

PredictorRun train_predictor(const std::vector<TrainingSample>& samples, const NetConfig& net,
                             const TrainConfig& cfg, Parity parity, int stream,
                             const EpochCallback& on_epoch, std::mutex& callback_mutex) {
  const std::string name = parity == Parity::Odd ? "odd" : "even";
  PredictorRun run{init_params(net, derive_seed(cfg.seed, 1, stream)), {}};
  OptimizerState opt = OptimizerState::zeros(run.params.values.size());
  std::vector<TrainingSample> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    Rng rng(derive_seed(cfg.seed, 2, stream, static_cast<std::uint64_t>(epoch)));
    const auto order = permutation(samples.size(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(samples[order[i]]);
      double loss;
      try {
        loss = train_step(run.params, opt, batch, parity, cfg, lr);
      } catch (const TrainingDiverged& e) {
        throw TrainingDiverged(std::string(e.what()) + " (" + name + " predictor, epoch " +
                               std::to_string(epoch) + ")");
      }
      loss_sum += loss * static_cast<double>(end - start);
    }
    TrainingLogRow row{epoch, name, loss_sum / static_cast<double>(samples.size()), lr};
    run.log.push_back(row);
    if (on_epoch) {
      std::lock_guard lock(callback_mutex);
      on_epoch(row);
    }
  }
  return run;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TrainingResult train_dual(const std::vector<TrainingSample>& samples, const NetConfig& net_config,
                          const TrainConfig& train_config, const EpochCallback& on_epoch) {
  net_config.validate();
  train_config.validate();
  if (samples.empty()) throw Error("train_dual: empty training set");
  for (const auto& s : samples) {
    if (s.image.height() != net_config.height || s.image.width() != net_config.width) {
      throw Error("train_dual: image " + std::to_string(s.image.height()) + "x" +
                  std::to_string(s.image.width()) + " does not match model input " +
                  std::to_string(net_config.height) + "x" + std::to_string(net_config.width));
    }
    if (s.label < 0 || s.label >= net_config.num_classes) throw Error("train_dual: label out of range");
  }
  std::mutex callback_mutex;
  std::vector<PredictorRun> runs(2);
  const Parity parities[2] = {odd_predictor_parity, even_predictor_parity};
  parallel_for(
      2,
      [&](std::size_t k) {
        runs[k] = train_predictor(samples, net_config, train_config, parities[k],
                                  static_cast<int>(k), on_epoch, callback_mutex);
      },
      std::min(worker_threads(), 2));
  TrainingResult result{{std::move(runs[0].params), std::move(runs[1].params)}, {}};
  result.log = std::move(runs[0].log);
  result.log.insert(result.log.end(), runs[1].log.begin(), runs[1].log.end());
  return result;
}

std::vector<TrainingSample> load_samples(const DatasetManifest& manifest) {
  std::vector<TrainingSample> samples;
  samples.reserve(manifest.records.size());
  for (const auto& r : manifest.records) samples.push_back({load_image(manifest.resolve(r)), r.label});
  return samples;
}

TrainingResult train_dual(const DatasetManifest& manifest, const NetConfig& net_config,
                          const TrainConfig& train_config, const EpochCallback& on_epoch) {
  if (manifest.records.empty()) throw Error("train_dual: empty manifest");
  manifest.validate();
  return train_dual(load_samples(manifest), net_config, train_config, on_epoch);
}

ImageTensor denoise(const DualModel& model, const ImageTensor& img) {
  const ModelParams& odd = model.odd_predictor;
  if (img.height() != odd.config.height || img.width() != odd.config.width) {
    throw Error("shape mismatch: image " + std::to_string(img.height()) + "x" +
                std::to_string(img.width()) + ", model " + std::to_string(odd.config.height) +
                "x" + std::to_string(odd.config.width));
  }
  ImageTensor pred_for_odd =
      forward(odd, make_blind(img, odd_predictor_parity).image, Mode::eval).image(0);
  ImageTensor pred_for_even =
      forward(model.even_predictor, make_blind(img, even_predictor_parity).image, Mode::eval).image(0);
  return fuse(pred_for_odd, pred_for_even);
}

std::vector<double> classify_logits(const DualModel& model, const ImageTensor& img, Head head) {
  const ModelParams& params = head == Head::odd ? model.odd_predictor : model.even_predictor;
  const Parity parity = head == Head::odd ? odd_predictor_parity : even_predictor_parity;
  if (img.height() != params.config.height || img.width() != params.config.width) {
    throw Error("shape mismatch: image does not match model input size");
  }
  return forward(params, make_blind(img, parity).image, Mode::eval).logits;
}

int classify(const DualModel& model, const ImageTensor& img, Head head) {
  auto logits = classify_logits(model, img, head);
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

void save_dual_model(const DualModel& model, const fs::path& dir) {
  if (!(model.odd_predictor.config == model.even_predictor.config)) {
    throw Error("dual model predictors must share one config");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  save_checkpoint(model.odd_predictor, dir / "odd.ckpt");
  save_checkpoint(model.even_predictor, dir / "even.ckpt");
  json index{{"format_version", kCheckpointVersion},
             {"config", to_json(model.odd_predictor.config)},
             {"odd_predictor", "odd.ckpt"},
             {"even_predictor", "even.ckpt"}};
  std::ofstream out(dir / "model.json", std::ios::trunc);
  if (!out) throw Error("cannot write " + (dir / "model.json").string());
  out << index.dump(2) << "\n";
}

DualModel load_dual_model(const fs::path& dir) {
  json index;
  try {
    index = json::parse(read_text(dir / "model.json"));
  } catch (const json::exception& e) {
    throw Error("malformed model index in " + dir.string() + ": " + e.what());
  }
  DualModel model{load_checkpoint(dir / index.at("odd_predictor").get<std::string>()),
                  load_checkpoint(dir / index.at("even_predictor").get<std::string>())};
  if (!(model.odd_predictor.config == model.even_predictor.config) ||
      !(model.odd_predictor.config == net_config_from_json(index.at("config")))) {
    throw Error("dual model checkpoints disagree on config");
  }
  return model;
}

void write_training_csv(const std::vector<TrainingLogRow>& log, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "epoch,model,mean_loss,lr\n";
  out.precision(17);
  for (const auto& row : log) {
    out << row.epoch << "," << row.model << "," << row.mean_loss << "," << row.lr << "\n";
  }
}

}  // namespace ccd
