#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ccd/checkerboard.hpp"
#include "ccd/losses.hpp"
#include "ccd/network.hpp"

namespace ccd {

enum class LossPositions { blinded_only, full_image };

struct TrainConfig {
  int epochs = 12;
  int batch_size = 8;
  double lr = 1e-3;
  std::vector<int> lr_milestones{7, 10};
  double lr_gamma = 0.1;
  LossWeights loss_weights{1.0, 0.2};
  LossPositions loss_positions = LossPositions::blinded_only;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;

  /// Milestones at 60% and 85% of `epochs` (deduplicated, kept < epochs).
  static std::vector<int> default_milestones(int epochs);

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;

  static OptimizerState zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }
};

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
               double lr, const AdamSettings& settings = {});

/// lr * gamma^(number of milestones <= epoch).
double lr_at(int epoch, const TrainConfig& config);

struct TrainingSample {
  ImageTensor image;
  int label = 0;
};

struct BatchGradient {
  double loss = 0.0;  // batch mean of the composite loss
  std::vector<double> grads;
  std::vector<ImageTensor> d_pred;  // per-item pixel-loss gradient
  ForwardCache cache;
};

/// Blinds every item at `blind_parity`, runs a train-mode forward over the
/// batch and returns the batch-mean composite loss and its gradient. Pixel
/// supervision targets the unblinded noisy image.
BatchGradient batch_gradient(const ModelParams& model, std::span<const TrainingSample> batch,
                             Parity blind_parity, const TrainConfig& config);

/// batch_gradient followed by a BatchNorm statistics commit and one Adam step.
/// Returns the batch-mean loss. Throws TrainingDiverged on a non-finite loss.
double train_step(ModelParams& model, OptimizerState& opt, std::span<const TrainingSample> batch,
                  Parity blind_parity, const TrainConfig& config, double lr);

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

/// Two predictors sharing a NetConfig. The odd predictor sees images whose
/// odd pixels are hidden and reconstructs them; the even predictor mirrors it.
struct DualModel {
  ModelParams odd_predictor;
  ModelParams even_predictor;

  friend bool operator==(const DualModel&, const DualModel&) = default;
};

/// The parity a predictor hides during training and fills at inference.
constexpr Parity odd_predictor_parity = Parity::Odd;
constexpr Parity even_predictor_parity = Parity::Even;

struct TrainingLogRow {
  int epoch = 0;
  std::string model;  // "odd" | "even"
  double mean_loss = 0.0;
  double lr = 0.0;
};

using EpochCallback = std::function<void(const TrainingLogRow&)>;

struct TrainingResult {
  DualModel model;
  std::vector<TrainingLogRow> log;  // odd rows first, then even rows
};

/// Trains both predictors independently on the same schedule. Deterministic
/// in (samples, configs, seed); with two or more worker threads the two
/// predictors train concurrently.
TrainingResult train_dual(const std::vector<TrainingSample>& samples, const NetConfig& net_config,
                          const TrainConfig& train_config, const EpochCallback& on_epoch = {});
TrainingResult train_dual(const DatasetManifest& manifest, const NetConfig& net_config,
                          const TrainConfig& train_config, const EpochCallback& on_epoch = {});

std::vector<TrainingSample> load_samples(const DatasetManifest& manifest);

/// Eval-mode inference: each predictor fills its own parity, outputs fused.
ImageTensor denoise(const DualModel& model, const ImageTensor& img);

enum class Head { odd, even };

/// Logits of one predictor's classification head on its training-style input.
std::vector<double> classify_logits(const DualModel& model, const ImageTensor& img, Head head = Head::odd);
int classify(const DualModel& model, const ImageTensor& img, Head head = Head::odd);

/// Writes odd.ckpt, even.ckpt and the model.json index into `dir`.
void save_dual_model(const DualModel& model, const std::filesystem::path& dir);
DualModel load_dual_model(const std::filesystem::path& dir);

void write_training_csv(const std::vector<TrainingLogRow>& log, const std::filesystem::path& path);

}  // namespace ccd
