// Behavioral cloning: a small tanh MLP regressing expert yoke commands from
// features, trained by minibatch gradient descent on the summed squared
// action error.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "flighttutor/dataset.hpp"

namespace ftutor {

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weights;  // row-major, out x in
  std::vector<double> biases;   // out

  bool operator==(const DenseLayer&) const = default;
};

struct TrainingMeta {
  std::uint64_t seed = 0;
  int epochs = 0;
  int best_epoch = 0;
  double train_loss = 0.0;  // per-sample mean
  double val_loss = 0.0;    // per-sample mean, 0 without a validation split
  double best_eval = 0.0;   // eval metric of the returned snapshot

  bool operator==(const TrainingMeta&) const = default;
};

/// Normalization constants the policy was trained against.
struct FeatureScales {
  double altitude = kAltitudeScale;
  double airspeed = kAirspeedScale;
  double pitch_limit = 20.0;
  double roll_limit = 45.0;
  double dt = 0.05;

  bool operator==(const FeatureScales&) const = default;
};

struct Policy {
  std::vector<int> layer_sizes;
  std::vector<DenseLayer> layers;  // tanh after every layer
  std::string feature_schema = kFeatureSchema;
  FeatureScales scales;
  TrainingMeta meta;

  std::size_t parameter_count() const;
  bool operator==(const Policy&) const = default;
};

inline const std::vector<int> kDefaultLayerSizes = {8, 32, 32, 2};

/// All-zero parameters of the given shape.
Policy make_policy(const std::vector<int>& layer_sizes = kDefaultLayerSizes);

/// Uniform +-1/sqrt(fan_in) initialization.
Policy init_policy(std::uint64_t seed,
                   const std::vector<int>& layer_sizes = kDefaultLayerSizes);

/// Output (yoke_pitch, yoke_roll); strictly inside (-1, 1) for finite input.
ControlInput forward(const Policy& policy, const FeatureVector& features);

struct LossValue {
  double sum = 0.0;   // sum over the batch of squared action error
  double mean = 0.0;  // sum / batch size
};

LossValue bc_loss(const Policy& policy, std::span<const Sample> batch);

/// Gradient of bc_loss(...).sum with respect to every parameter; same shape
/// as policy.layers.
std::vector<DenseLayer> bc_grad(const Policy& policy, std::span<const Sample> batch);

struct TrainConfig {
  double learning_rate = 0.1;
  // The step size decays linearly from learning_rate to
  // learning_rate * lr_final_fraction at max_epochs.
  double lr_final_fraction = 0.02;
  int batch_size = 32;
  int max_epochs = 500;
  int eval_every = 25;
  int patience = 5;
  std::uint64_t seed = 1;
  double val_fraction = 0.2;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct EpochRecord {
  int epoch = 0;  // 0 = before the first update
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct EvalRecord {
  int epoch = 0;
  double heading_error = 0.0;
};

struct TrainingCurve {
  std::vector<EpochRecord> epochs;
  std::vector<EvalRecord> evals;
  int best_epoch = 0;
  bool early_stopped = false;

  /// Tab-separated table: one row per epoch, heading error filled on
  /// evaluation epochs.
  std::string to_table() const;
};

struct TrainResult {
  Policy policy;
  TrainingCurve curve;
};

/// Lower is better. Called with the current parameters every eval_every
/// epochs.
using EvalHook = std::function<double(const Policy&)>;

TrainResult train(const Dataset& dataset, const TrainConfig& config,
                  const EvalHook& eval_hook);

std::string serialize(const Policy& policy);
Policy deserialize_policy(const std::string& text);
void save_policy(const Policy& policy, const std::filesystem::path& path);
Policy load_policy(const std::filesystem::path& path);

}  // namespace ftutor
