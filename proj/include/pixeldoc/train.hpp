#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pixeldoc/model.hpp"

namespace pixeldoc {

struct Schedule {
  double peak_lr = 1.5e-4;
  double min_lr = 1e-5;
  int warmup_steps = 50;
  int total_steps = 1000;

  void validate() const;
  /// Linear warmup to peak, then cosine decay reaching min_lr at the final step.
  double lr(int step) const;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

struct OptimState {
  ModelParams<float> m;
  ModelParams<float> v;
  int step = 0;
  Schedule schedule;
  AdamWConfig adamw;

  static OptimState for_params(const ModelParams<float>& params, Schedule schedule, AdamWConfig adamw = {});
};

/// One AdamW update from accumulated gradients.  Weight decay applies to
/// matrices (names ending in ".w") only.
void adamw_update(ModelParams<float>& params, OptimState& optim, const ModelParams<float>& grads, double lr);

struct StepRecord {
  int step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

/// Mean loss over the batch, one optimizer update.  Throws NonFiniteLoss
/// (naming `batch_id`) before touching params if the loss or any gradient is
/// not finite.
StepRecord train_step(ModelParams<float>& params, OptimState& optim, std::span<const Example<float>> batch,
                      Objective objective, std::int64_t batch_id, const DropoutCtx& drop = {});

using BatchSource = std::function<std::vector<Example<float>>(int step)>;

struct TrainOptions {
  Objective objective = Objective::Mae;
  int steps = 0;
  std::uint64_t seed = 0;
  std::function<void(const StepRecord&)> on_step;
};

/// Runs `steps` updates; batches come from `source` in step order.
std::vector<StepRecord> train(ModelParams<float>& params, OptimState& optim, const BatchSource& source,
                              const TrainOptions& opts);

}  // namespace pixeldoc
