#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csrnet/adam.hpp"
#include "csrnet/checkpoint.hpp"
#include "csrnet/image.hpp"
#include "csrnet/model.hpp"

namespace csrnet::train {

struct TrainingPair {
  ImageRGB input;
  ImageRGB target;
  std::string name;
};

enum class TrainMode { full, condition_only };

struct TrainLogEntry {
  std::uint64_t iteration = 0;  // iterations completed
  double loss = 0.0;            // mean L1 over the interval
  double step_size = 0.0;
  double elapsed_seconds = 0.0;
};

struct TrainConfig {
  ModelConfig model;  // ignored when training starts from existing params
  double initial_step_size = 1e-4;
  std::uint64_t decay_interval = 100'000;  // step size halves this often
  std::uint64_t iterations = 600'000;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::full;
  nn::AdamConfig adam;
  std::uint64_t log_interval = 100;
  std::string style;
  /// Called after each log entry is recorded; may be empty.
  std::function<void(const TrainLogEntry&)> on_log;
};

/// initial * 2^-floor(iteration / decay_interval); iterations count from 0.
double step_size_at(const TrainConfig& config, std::uint64_t iteration);

struct TrainLog {
  std::vector<TrainLogEntry> entries;
  std::vector<std::string> warnings;
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainLog log;
};

template <typename T>
struct LossAndGrad {
  double loss = 0.0;
  BasicTensor<T> grad;
};

/// Mean absolute error and its gradient sign(pred - target) / count, with
/// sign(0) = 0.
template <typename T>
LossAndGrad<T> l1_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target);

/// Zeroes gradients of tensors the mode keeps fixed.
void apply_freeze(ModelParams& grads, TrainMode mode);

/// Supervised training with batch size 1 over full images. Pairs are visited
/// in a fresh seeded permutation on every pass. Starts from `init` when given,
/// otherwise from build_model(config.model, config.seed).
TrainResult train(const TrainConfig& config, std::span<const TrainingPair> dataset,
                  std::optional<ModelParams> init = std::nullopt);

/// Adapts a trained model to a new style by updating only the condition
/// network and the modulation heads.
TrainResult finetune_condition(TrainConfig config, const Checkpoint& base,
                               std::span<const TrainingPair> dataset);

/// Mean L1 of the unclamped output over the dataset.
double dataset_loss(const ModelParams& params, std::span<const TrainingPair> dataset);

/// Mean PSNR of the clamped output against the targets.
double dataset_psnr(const ModelParams& params, std::span<const TrainingPair> dataset);

// ---------------------------------------------------------------------------

struct GradientCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  /// Parameters to compare; 0 compares every parameter.
  std::size_t samples = 500;
  std::uint64_t seed = 0;
  /// Groups to draw from; empty means all groups.
  std::vector<ParamGroup> groups;
  /// Denominator floor of the relative error.
  double floor = 1e-6;
};

struct GradientCheckEntry {
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct GradientCheckReport {
  std::size_t checked = 0;
  /// Draws rejected because a ReLU or the L1 loss changed branch within
  /// +-epsilon, where central differences are not a derivative estimate.
  std::size_t skipped_kinks = 0;
  double max_relative_error = 0.0;
  GradientCheckEntry worst;
  std::map<ParamGroup, std::size_t> per_group;
  bool passed = false;
};

/// Compares the analytic gradient of the L1 training loss against central
/// differences, both computed on the double-precision mirror of `params`.
GradientCheckReport gradient_check(const ModelParams& params, const ImageRGB& image,
                                   const ImageRGB& target,
                                   const GradientCheckOptions& options = {});

}  // namespace csrnet::train
