#include "csrnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "csrnet/gradcheck.hpp"
#include "csrnet/metrics.hpp"

namespace csrnet::train {

double step_size_at(const TrainConfig& config, std::uint64_t iteration) {
  if (config.decay_interval == 0) return config.initial_step_size;
  const auto halvings = static_cast<int>(iteration / config.decay_interval);
  return std::ldexp(config.initial_step_size, -halvings);
}

template <typename T>
LossAndGrad<T> l1_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw std::invalid_argument("l1_loss shape mismatch: " + to_string(pred.shape()) +
                                " vs " + to_string(target.shape()));
  }
  LossAndGrad<T> out{0.0, BasicTensor<T>(pred.shape())};
  const T inv_count = T{1} / static_cast<T>(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred[i] - target[i];
    sum += std::abs(static_cast<double>(d));
    out.grad[i] = d > T{0} ? inv_count : (d < T{0} ? -inv_count : T{0});
  }
  out.loss = sum / static_cast<double>(pred.size());
  return out;
}

template LossAndGrad<float> l1_loss(const Tensor&, const Tensor&);
template LossAndGrad<double> l1_loss(const Tensor64&, const Tensor64&);

void apply_freeze(ModelParams& grads, TrainMode mode) {
  if (mode != TrainMode::condition_only) return;
  grads.for_each_tensor([](const std::string& name, Tensor& t) {
    if (group_of(name) == ParamGroup::base) t.fill(0.0f);
  });
}

namespace {

void validate(const TrainConfig& config, std::span<const TrainingPair> dataset) {
  if (dataset.empty()) throw std::invalid_argument("training needs a non-empty dataset");
  if (!(config.initial_step_size > 0.0)) {
    throw std::invalid_argument("initial step size must be positive");
  }
  for (const auto& pair : dataset) {
    require_same_size(pair.input, pair.target, "training pair");
  }
}

// Tensors the optimizer updates, in checkpoint order.
std::vector<Tensor*> trainable(ModelParams& params, TrainMode mode) {
  std::vector<Tensor*> out;
  params.for_each_tensor([&](const std::string& name, Tensor& t) {
    if (mode == TrainMode::full || group_of(name) != ParamGroup::base) out.push_back(&t);
  });
  return out;
}

}  // namespace

TrainResult train(const TrainConfig& config, std::span<const TrainingPair> dataset,
                  std::optional<ModelParams> init) {
  validate(config, dataset);
  ModelParams params = init ? std::move(*init) : build_model(config.model, config.seed);

  std::vector<Tensor*> targets = trainable(params, config.mode);
  std::vector<const Tensor*> const_targets(targets.begin(), targets.end());
  nn::AdamState adam(const_targets, config.adam);

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(dataset.size());
  std::size_t cursor = order.size();

  TrainResult result;
  const auto start = std::chrono::steady_clock::now();
  double interval_loss = 0.0;
  std::uint64_t interval_count = 0;

  for (std::uint64_t it = 0; it < config.iterations; ++it) {
    if (cursor == order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const TrainingPair& pair = dataset[order[cursor++]];

    const auto trace = trace_forward(params, pair.input);
    const auto loss = l1_loss(trace.output, pair.target.tensor());
    ModelParams grads = trace_backward(params, trace, loss.grad);
    apply_freeze(grads, config.mode);

    std::vector<const Tensor*> grad_ptrs;
    grads.for_each_tensor([&](const std::string& name, const Tensor& t) {
      if (config.mode == TrainMode::full || group_of(name) != ParamGroup::base) {
        grad_ptrs.push_back(&t);
      }
    });
    adam.apply(targets, grad_ptrs, step_size_at(config, it));

    interval_loss += loss.loss;
    ++interval_count;
    const bool last = it + 1 == config.iterations;
    if (last || (config.log_interval > 0 && (it + 1) % config.log_interval == 0)) {
      TrainLogEntry entry;
      entry.iteration = it + 1;
      entry.loss = interval_loss / static_cast<double>(interval_count);
      entry.step_size = step_size_at(config, it);
      entry.elapsed_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.log.entries.push_back(entry);
      if (config.on_log) config.on_log(entry);
      interval_loss = 0.0;
      interval_count = 0;
    }
  }

  result.checkpoint.params = std::move(params);
  result.checkpoint.training = {config.iterations, config.seed, config.style};
  return result;
}

TrainResult finetune_condition(TrainConfig config, const Checkpoint& base,
                               std::span<const TrainingPair> dataset) {
  if (!base.params.config.has_condition_network() &&
      base.params.gamma_heads.empty()) {
    throw std::invalid_argument("model has nothing to finetune");
  }
  config.mode = TrainMode::condition_only;
  auto result = train(config, dataset, base.params);
  result.checkpoint.training.iterations += base.training.iterations;
  return result;
}

double dataset_loss(const ModelParams& params, std::span<const TrainingPair> dataset) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  double total = 0.0;
  for (const auto& pair : dataset) {
    const auto trace = trace_forward(params, pair.input);
    total += l1_loss(trace.output, pair.target.tensor()).loss;
  }
  return total / static_cast<double>(dataset.size());
}

double dataset_psnr(const ModelParams& params, std::span<const TrainingPair> dataset) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  double total = 0.0;
  for (const auto& pair : dataset) {
    total += metrics::psnr(forward(params, pair.input), pair.target);
  }
  return total / static_cast<double>(dataset.size());
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t sign_pattern(const Tensor64& pred, const Tensor64& target) {
  std::uint64_t hash = 1469598103934665603ull;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    hash ^= pred[i] > target[i] ? 1u : (pred[i] < target[i] ? 2u : 0u);
    hash *= 1099511628211ull;
  }
  return hash;
}

struct Evaluation {
  double loss;
  std::uint64_t pattern;
};

}  // namespace

GradientCheckReport gradient_check(const ModelParams& params, const ImageRGB& image,
                                   const ImageRGB& target,
                                   const GradientCheckOptions& options) {
  require_same_size(image, target, "gradient_check");
  if (!(options.epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");

  ModelParams64 theta = params.cast<double>();
  const Tensor64 gt = target.tensor().cast<double>();

  auto evaluate = [&]() {
    const auto trace = trace_forward(theta, image);
    const auto loss = l1_loss(trace.output, gt);
    return Evaluation{loss.loss, activation_pattern(trace) ^
                                     (sign_pattern(trace.output, gt) * 31u)};
  };

  const auto trace = trace_forward(theta, image);
  const auto loss = l1_loss(trace.output, gt);
  const ModelParams64 analytic = trace_backward(theta, trace, loss.grad);
  const std::uint64_t base_pattern =
      activation_pattern(trace) ^ (sign_pattern(trace.output, gt) * 31u);

  struct Slot {
    std::string name;
    ParamGroup group;
    Tensor64* value;
    const Tensor64* grad;
  };
  std::vector<Slot> slots;
  theta.for_each_tensor([&](const std::string& name, Tensor64& t) {
    const ParamGroup g = group_of(name);
    if (options.groups.empty() ||
        std::find(options.groups.begin(), options.groups.end(), g) != options.groups.end()) {
      slots.push_back({name, g, &t, nullptr});
    }
  });
  {
    std::size_t i = 0;
    analytic.for_each_tensor([&](const std::string& name, const Tensor64& t) {
      if (i < slots.size() && slots[i].name == name) slots[i++].grad = &t;
    });
  }
  if (slots.empty()) throw std::invalid_argument("gradient_check: no parameters selected");

  GradientCheckReport report;

  auto check_one = [&](const Slot& slot, std::size_t index) {
    double& value = (*slot.value)[index];
    const double saved = value;
    value = saved + options.epsilon;
    const Evaluation plus = evaluate();
    value = saved - options.epsilon;
    const Evaluation minus = evaluate();
    value = saved;
    if (plus.pattern != base_pattern || minus.pattern != base_pattern) {
      ++report.skipped_kinks;
      return false;
    }
    const double numeric = (plus.loss - minus.loss) / (2.0 * options.epsilon);
    const double a = (*slot.grad)[index];
    const double rel = nn::relative_error(a, numeric, options.floor);
    ++report.checked;
    ++report.per_group[slot.group];
    if (rel >= report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst = {slot.name, index, a, numeric, rel};
    }
    return true;
  };

  if (options.samples == 0) {
    for (const auto& slot : slots) {
      for (std::size_t i = 0; i < slot.value->size(); ++i) check_one(slot, i);
    }
  } else {
    // Round-robin over tensors so every selected tensor is represented.
    std::mt19937_64 rng(options.seed);
    const std::size_t max_draws = options.samples * 20;
    std::size_t draws = 0;
    for (std::size_t s = 0; report.checked < options.samples && draws < max_draws; ++s) {
      const Slot& slot = slots[s % slots.size()];
      std::uniform_int_distribution<std::size_t> pick(0, slot.value->size() - 1);
      ++draws;
      check_one(slot, pick(rng));
    }
  }
  report.passed = report.checked > 0 && report.max_relative_error <= options.tolerance;
  return report;
}

}  // namespace csrnet::train
