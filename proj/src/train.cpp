#include "pixeldoc/train.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "pixeldoc/errors.hpp"

namespace pixeldoc {

void Schedule::validate() const {
  require(peak_lr > 0.0, ErrorKind::ConfigInvalid, "optim.lr: must be positive");
  require(min_lr >= 0.0 && min_lr <= peak_lr, ErrorKind::ConfigInvalid, "optim.min_lr: must lie in [0, lr]");
  require(warmup_steps >= 0, ErrorKind::ConfigInvalid, "optim.warmup: must be non-negative");
  require(total_steps >= 0, ErrorKind::ConfigInvalid, "optim.steps: must be non-negative");
}

double Schedule::lr(int step) const {
  if (step < warmup_steps) return peak_lr * (step + 1) / warmup_steps;
  const int span = std::max(1, total_steps - 1 - warmup_steps);
  const double t = std::min(1.0, static_cast<double>(step - warmup_steps) / span);
  return min_lr + 0.5 * (peak_lr - min_lr) * (1.0 + std::cos(std::numbers::pi * t));
}

OptimState OptimState::for_params(const ModelParams<float>& params, Schedule schedule, AdamWConfig adamw) {
  schedule.validate();
  return {params.zeros_like(), params.zeros_like(), 0, schedule, adamw};
}

namespace {

// Parallel walk over tensors that share a layout.
template <typename F>
void zip(ModelParams<float>& p, ModelParams<float>& m, ModelParams<float>& v, const ModelParams<float>& g, F&& f) {
  std::vector<Mat<float>*> ms, vs;
  std::vector<const Mat<float>*> gs;
  m.for_each([&](const std::string&, Mat<float>& t) { ms.push_back(&t); });
  v.for_each([&](const std::string&, Mat<float>& t) { vs.push_back(&t); });
  g.for_each([&](const std::string&, const Mat<float>& t) { gs.push_back(&t); });
  std::size_t i = 0;
  p.for_each([&](const std::string& name, Mat<float>& t) {
    require(i < gs.size() && gs[i]->size() == t.size() && ms[i]->size() == t.size(), ErrorKind::ShapeMismatch,
            "optimizer state does not match parameter " + name);
    f(name, t, *ms[i], *vs[i], *gs[i]);
    ++i;
  });
}

}  // namespace

void adamw_update(ModelParams<float>& params, OptimState& optim, const ModelParams<float>& grads, double lr) {
  const AdamWConfig& c = optim.adamw;
  ++optim.step;
  const double bc1 = 1.0 - std::pow(c.beta1, optim.step);
  const double bc2 = 1.0 - std::pow(c.beta2, optim.step);
  zip(params, optim.m, optim.v, grads,
      [&](const std::string& name, Mat<float>& w, Mat<float>& m, Mat<float>& v, const Mat<float>& g) {
        const bool decay = name.ends_with(".w");
        for (Eigen::Index i = 0; i < w.size(); ++i) {
          const double gi = g.data()[i];
          const double mi = c.beta1 * m.data()[i] + (1.0 - c.beta1) * gi;
          const double vi = c.beta2 * v.data()[i] + (1.0 - c.beta2) * gi * gi;
          m.data()[i] = static_cast<float>(mi);
          v.data()[i] = static_cast<float>(vi);
          double wi = w.data()[i];
          if (decay) wi -= lr * c.weight_decay * wi;
          wi -= lr * (mi / bc1) / (std::sqrt(vi / bc2) + c.eps);
          w.data()[i] = static_cast<float>(wi);
        }
      });
}

StepRecord train_step(ModelParams<float>& params, OptimState& optim, std::span<const Example<float>> batch,
                      Objective objective, std::int64_t batch_id, const DropoutCtx& drop) {
  require(!batch.empty(), ErrorKind::UsageError, "empty batch");
  ModelParams<float> grads = params.zeros_like();
  const float scale = 1.0f / static_cast<float>(batch.size());
  double loss = 0.0;
  for (const auto& ex : batch) loss += loss_and_grad(params, ex, objective, grads, scale, drop);
  loss /= static_cast<double>(batch.size());
  require(std::isfinite(loss) && grads.all_finite(), ErrorKind::NonFiniteLoss,
          "non-finite loss or gradient at batch " + std::to_string(batch_id));
  StepRecord rec{optim.step, optim.schedule.lr(optim.step), loss};
  adamw_update(params, optim, grads, rec.lr);
  return rec;
}

std::vector<StepRecord> train(ModelParams<float>& params, OptimState& optim, const BatchSource& source,
                              const TrainOptions& opts) {
  std::vector<StepRecord> log;
  Rng drop_rng = make_rng(opts.seed, "dropout");
  const DropoutCtx drop{&drop_rng, params.config.dropout};
  for (int s = 0; s < opts.steps; ++s) {
    const std::vector<Example<float>> batch = source(s);
    StepRecord rec = train_step(params, optim, batch, opts.objective, s, drop);
    if (opts.on_step) opts.on_step(rec);
    log.push_back(rec);
  }
  return log;
}

}  // namespace pixeldoc
