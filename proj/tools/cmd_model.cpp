#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <numeric>

#include "cli.hpp"
#include "pixeldoc/checkpoint.hpp"
#include "pixeldoc/errors.hpp"
#include "pixeldoc/manifest.hpp"

namespace pixeldoc::cli {

namespace {

ModelParams<float> start_params(const RunConfig& cfg, bool required) {
  if (cfg.paths.checkpoint.empty()) {
    require(!required, ErrorKind::UsageError, "--ckpt is required");
    return ModelParams<float>::init(cfg.model, derive_seed(cfg.seed, "init"));
  }
  ModelParams<float> p = load_checkpoint(require_input(cfg.paths.checkpoint, "paths.checkpoint"));
  p.config.dropout = cfg.model.dropout;
  return p;
}

// Sample order: a fresh permutation of [0, n) per epoch, consumed batch by batch.
class EpochOrder {
 public:
  EpochOrder(int n, std::uint64_t seed, std::string purpose) : n_(n), seed_(seed), purpose_(std::move(purpose)) {}

  std::vector<int> batch(int step, int size) {
    std::vector<int> out;
    for (int j = 0; j < size; ++j) {
      const std::int64_t k = static_cast<std::int64_t>(step) * size + j;
      const std::int64_t epoch = k / n_;
      if (epoch != epoch_) {
        perm_.resize(n_);
        std::iota(perm_.begin(), perm_.end(), 0);
        Rng rng = make_rng(seed_, purpose_, static_cast<std::uint64_t>(epoch));
        std::shuffle(perm_.begin(), perm_.end(), rng);
        epoch_ = epoch;
      }
      out.push_back(perm_[k % n_]);
    }
    return out;
  }

 private:
  int n_;
  std::uint64_t seed_;
  std::string purpose_;
  std::int64_t epoch_ = -1;
  std::vector<int> perm_;
};

std::vector<StepRecord> run_training(const Context& ctx, ModelParams<float>& params, const BatchSource& source,
                                     Objective objective, const fs::path& out) {
  const RunConfig& cfg = ctx.cfg;
  std::ofstream log(out / "metrics.jsonl");
  require(log.good(), ErrorKind::Io, "cannot write " + (out / "metrics.jsonl").string());
  OptimState optim = OptimState::for_params(params, schedule_from(cfg.optim), adamw_from(cfg.optim));
  TrainOptions opts;
  opts.objective = objective;
  opts.steps = cfg.optim.steps;
  opts.seed = derive_seed(cfg.seed, "train");
  opts.on_step = [&](const StepRecord& r) {
    log << Json{{"step", r.step}, {"lr", r.lr}, {"loss", r.loss}}.dump() << '\n';
    log.flush();
    if (r.step % 100 == 0 || r.step + 1 == cfg.optim.steps)
      spdlog::info("{} step {} lr {:.3g} loss {:.5f}", ctx.command, r.step, r.lr, r.loss);
  };
  return train(params, optim, source, opts);
}

std::vector<Example<float>> task_examples(const std::vector<TaskItem>& items, const ModelConfig& model) {
  std::vector<Example<float>> out(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    out[i].patches = patchify<float>(items[i].image, model.grid());
    out[i].mask = items[i].mask;
    out[i].label = items[i].label;
  }
  return out;
}

// Items of qa.jsonl / seq.jsonl, or generated in memory when no dataset is given.
std::vector<TaskItem> task_items(const Context& ctx, bool qa) {
  const RunConfig& cfg = ctx.cfg;
  if (!cfg.paths.manifest.empty())
    return load_task_items(require_input(cfg.paths.manifest, "paths.manifest"), cfg.model, qa);
  const Toolkit kit = Toolkit::from_config(cfg);
  const int n = qa ? cfg.qa.n : cfg.seq.n;
  const double val = qa ? cfg.qa.val_fraction : cfg.seq.val_fraction;
  require(n > 0, ErrorKind::UsageError, "no dataset given and the instance count is 0");
  std::vector<TaskItem> items(n);
  const auto ocr = qa ? qa_ocr(cfg) : nullptr;
  const auto vocab = qa ? std::vector<std::string>{} : corpus_vocab(kit.corpus);
  parallel_for(n, ctx.threads, [&](int i) {
    TaskItem& it = items[i];
    it.id = (qa ? "qa_" : "seq_") + pad_index(i);
    it.split = in_validation(i, n, val) ? "validation" : "train";
    if (qa) {
      QAInstance inst = qa_instance(cfg, kit, *ocr, i);
      it.image = fit_to_model(inst.image.pixels, cfg.model);
      it.mask = inst.mask;
    } else {
      SeqExample ex = seq_instance(cfg, kit, vocab, i);
      it.image = fit_to_model(ex.scan.pixels, cfg.model);
      it.label = ex.label;
    }
  });
  return items;
}

std::pair<std::vector<TaskItem>, std::vector<TaskItem>> split_items(std::vector<TaskItem> items) {
  std::vector<TaskItem> train, val;
  for (auto& it : items) (it.split == "validation" ? val : train).push_back(std::move(it));
  require(!train.empty(), ErrorKind::EmptyCorpus, "no training instances");
  if (val.empty()) spdlog::warn("no validation instances; evaluation is skipped");
  return {std::move(train), std::move(val)};
}

BatchSource example_batches(const std::vector<Example<float>>& examples, int batch, std::uint64_t seed) {
  auto order = std::make_shared<EpochOrder>(static_cast<int>(examples.size()), seed, "order");
  return [&examples, order, batch](int step) {
    std::vector<Example<float>> b;
    for (int i : order->batch(step, batch)) b.push_back(examples[i]);
    return b;
  };
}

std::vector<std::vector<float>> predict_patches(const ModelParams<float>& params, const std::vector<TaskItem>& items,
                                                int threads) {
  std::vector<std::vector<float>> out(items.size());
  parallel_for(static_cast<int>(items.size()), threads, [&](int i) {
    out[i] = head_patch<float>(params, patchify<float>(items[i].image, params.config.grid()));
  });
  return out;
}

Json metrics_json(const QAMetrics& m, double threshold) {
  return {{"binary_acc", m.binary_acc},       {"patch_acc", m.patch_acc}, {"one_overlap", m.one_overlap},
          {"n_with_answer", m.n_with_answer}, {"n_without", m.n_without}, {"threshold", threshold}};
}

Image heatmap(const Image& gray, const std::vector<float>& probs, const PatchGrid& grid) {
  Image out(gray.height(), gray.width(), 3);
  for (int y = 0; y < gray.height(); ++y)
    for (int x = 0; x < gray.width(); ++x) {
      const int r = std::min(y / grid.patch_size, grid.rows - 1);
      const int c = std::min(x / grid.patch_size, grid.cols - 1);
      const float p = probs[r * grid.cols + c];
      const float v = gray.at(y, x);
      out.at(y, x, 0) = v;
      out.at(y, x, 1) = v * (1.0F - 0.7F * p);
      out.at(y, x, 2) = v * (1.0F - 0.7F * p);
    }
  return out;
}

}  // namespace

int cmd_pretrain(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const fs::path out = ctx.output_dir();
  ModelParams<float> params = start_params(cfg, false);
  const ModelConfig& model = params.config;

  std::vector<Image> images;
  Json inputs = Json::object();
  if (!cfg.paths.manifest.empty()) {
    const fs::path manifest_path = require_input(cfg.paths.manifest, "paths.manifest");
    const DatasetManifest m = read_manifest(manifest_path);
    std::vector<fs::path> files;
    for (const auto& e : m.entries)
      if (e.split == "train") files.push_back(manifest_path.parent_path() / e.path);
    images.resize(files.size());
    parallel_for(static_cast<int>(files.size()), ctx.threads,
                 [&](int i) { images[i] = load_model_image(files[i], model); });
    inputs["manifest"] = file_fingerprint(manifest_path);
  } else {
    const Toolkit kit = Toolkit::from_config(cfg);
    images.resize(cfg.synth.n);
    parallel_for(cfg.synth.n, ctx.threads,
                 [&](int i) { images[i] = fit_to_model(synth_scan(cfg, kit, i).scan.pixels, model); });
  }
  require(!images.empty(), ErrorKind::EmptyCorpus, "pretrain: no training scans");
  if (!cfg.paths.checkpoint.empty()) inputs["checkpoint"] = file_fingerprint(cfg.paths.checkpoint);

  const int n = static_cast<int>(images.size());
  std::vector<Mat<float>> patches(n);
  std::vector<PatchMask> fixed(n);
  for (int i = 0; i < n; ++i) {
    patches[i] = patchify<float>(images[i], model.grid());
    Rng r = make_rng(cfg.seed, "mask", static_cast<std::uint64_t>(i));
    fixed[i] = sample_span_mask(model.grid(), cfg.mask, r).mask;
  }
  EpochOrder order(n, cfg.seed, "order");
  const BatchSource source = [&](int step) {
    std::vector<Example<float>> batch;
    Rng r = make_rng(cfg.seed, "step-mask", static_cast<std::uint64_t>(step));
    for (int i : order.batch(step, cfg.optim.batch)) {
      Example<float> ex;
      ex.patches = patches[i];
      ex.mask = cfg.pretrain.fixed_masks ? fixed[i] : sample_span_mask(model.grid(), cfg.mask, r).mask;
      batch.push_back(std::move(ex));
    }
    return batch;
  };
  const auto records = run_training(ctx, params, source, Objective::Mae, out);
  save_checkpoint(out / "model.pxdc", params);

  double loss = 0.0, pixel = 0.0;
  for (int i = 0; i < n; ++i) {
    const MaeOutput<float> r = forward_mae(params, patches[i], fixed[i]);
    loss += r.loss;
    pixel += masked_pixel_mse(r.reconstruction, patches[i], fixed[i], model.norm_pix);
  }
  const Json summary{{"steps", records.size()},
                     {"scans", n},
                     {"final_loss", loss / n},
                     {"masked_pixel_mse", pixel / n},
                     {"checkpoint", (out / "model.pxdc").string()}};
  ctx.write_run_json(out, {{"inputs", inputs}, {"summary", summary}});
  emit(summary);
  return 0;
}

int cmd_finetune_seq(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const fs::path out = ctx.output_dir();
  ModelParams<float> params = start_params(cfg, false);
  params.reset_heads(2, false, derive_seed(cfg.seed, "head"));
  auto [train_items, val_items] = split_items(task_items(ctx, false));
  const auto examples = task_examples(train_items, params.config);
  run_training(ctx, params, example_batches(examples, cfg.optim.batch, cfg.seed), Objective::SeqHead, out);
  save_checkpoint(out / "model.pxdc", params);

  int correct = 0;
  for (const auto& it : val_items) {
    const Mat<float> logits = head_sequence(params, patchify<float>(it.image, params.config.grid()));
    Eigen::Index arg = 0;
    logits.row(0).maxCoeff(&arg);
    correct += static_cast<int>(arg) == it.label ? 1 : 0;
  }
  const Json eval{{"accuracy", val_items.empty() ? 0.0 : static_cast<double>(correct) / val_items.size()},
                  {"validation", val_items.size()},
                  {"train", train_items.size()}};
  write_json(out / "eval.json", eval);
  ctx.write_run_json(out, {{"eval", eval}});
  emit(eval);
  return 0;
}

int cmd_finetune_qa(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const fs::path out = ctx.output_dir();
  ModelParams<float> params = start_params(cfg, false);
  params.reset_heads(0, true, derive_seed(cfg.seed, "head"));
  auto [train_items, val_items] = split_items(task_items(ctx, true));
  const auto examples = task_examples(train_items, params.config);
  run_training(ctx, params, example_batches(examples, cfg.optim.batch, cfg.seed), Objective::PatchHead, out);
  save_checkpoint(out / "model.pxdc", params);

  Json eval{{"validation", val_items.size()}, {"train", train_items.size()}};
  if (!val_items.empty()) {
    std::vector<PatchMask> truth;
    for (const auto& it : val_items) truth.push_back(it.mask);
    const QAMetrics m = qa_metrics(predict_patches(params, val_items, ctx.threads), truth, cfg.qa.threshold);
    eval["metrics"] = metrics_json(m, cfg.qa.threshold);
  }
  write_json(out / "eval.json", eval);
  ctx.write_run_json(out, {{"eval", eval}});
  emit(eval);
  return 0;
}

int cmd_eval_qa(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  std::vector<TaskItem> items = task_items(ctx, true);
  const PatchGrid grid = cfg.model.grid();
  std::vector<std::vector<float>> probs;
  if (!cfg.paths.predictions.empty()) {
    const fs::path path = require_input(cfg.paths.predictions, "paths.predictions");
    try {
      for (const auto& row : read_jsonl(path)) probs.push_back(row.at("probs").get<std::vector<float>>());
    } catch (const Json::exception& e) {
      fail(ErrorKind::Format, path.string() + ": " + e.what());
    }
  } else {
    require(!cfg.paths.checkpoint.empty(), ErrorKind::UsageError, "eval qa needs --ckpt or --predictions");
    probs = predict_patches(start_params(cfg, true), items, ctx.threads);
  }
  require(probs.size() == items.size(), ErrorKind::LengthMismatch,
          "eval qa: " + std::to_string(probs.size()) + " predictions for " + std::to_string(items.size()) +
              " instances");

  std::vector<std::size_t> keep(items.size());
  std::iota(keep.begin(), keep.end(), 0);
  if (cfg.qa.balance) {
    std::vector<bool> has(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) has[i] = items[i].mask.any();
    Rng rng = make_rng(cfg.seed, "balance");
    keep = balanced_indices(has, rng);
  }
  std::vector<std::vector<float>> kept_probs;
  std::vector<PatchMask> truth;
  for (std::size_t i : keep) {
    kept_probs.push_back(probs[i]);
    truth.push_back(items[i].mask);
  }
  const QAMetrics m = qa_metrics(kept_probs, truth, cfg.qa.threshold);
  Json result = metrics_json(m, cfg.qa.threshold);
  result["instances"] = keep.size();

  if (!cfg.paths.output.empty()) {
    const fs::path out = ctx.output_dir();
    write_json(out / "metrics.json", result);
    std::vector<Json> rows;
    for (std::size_t i = 0; i < items.size(); ++i) rows.push_back({{"id", items[i].id}, {"probs", probs[i]}});
    write_jsonl(out / "predictions.jsonl", rows);
    for (std::size_t j = 0; j < std::min<std::size_t>(keep.size(), 16); ++j) {
      const std::size_t i = keep[j];
      write_png(heatmap(items[i].image, probs[i], grid), out / "heatmaps" / (items[i].id + ".png"));
    }
    ctx.write_run_json(out, {{"metrics", result}});
  }
  emit(result);
  return 0;
}

int cmd_recon_dump(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const ModelParams<float> params = start_params(cfg, true);
  const ModelConfig& model = params.config;
  const Image img = cfg.paths.probe.empty()
                        ? fit_to_model(synth_scan(cfg, Toolkit::from_config(cfg), 0).scan.pixels, model)
                        : load_model_image(require_input(cfg.paths.probe, "paths.probe"), model);
  // with fixed masks the synthetic scan 0 gets the mask it was trained with
  Rng rng = cfg.pretrain.fixed_masks && cfg.paths.probe.empty() ? make_rng(cfg.seed, "mask", 0)
                                                                 : make_rng(cfg.seed, "recon");
  const PatchMask mask = sample_span_mask(model.grid(), cfg.mask, rng).mask;
  const Mat<float> patches = patchify<float>(img, model.grid());
  const MaeOutput<float> r = forward_mae(params, patches, mask);
  Mat<float> composite = patches;
  const Mat<float> pixels = to_pixel_space(r.reconstruction, patches, model.norm_pix);
  for (int i = 0; i < mask.grid().count(); ++i)
    if (mask[i]) composite.row(i) = pixels.row(i).cwiseMax(0.0F).cwiseMin(1.0F);
  const Image recon = unpatchify(composite, model.grid(), model.channels);

  constexpr int kGap = 2;
  Image triptych(img.height(), img.width() * 3 + kGap * 2, 1, 0.5F);
  triptych.paste(img, 0, 0);
  triptych.paste(overlay_mask(img, mask), img.width() + kGap, 0);
  triptych.paste(recon, 2 * (img.width() + kGap), 0);

  const fs::path out = ctx.output_dir();
  write_png(triptych, out / "recon.png");
  const Json info{{"loss", r.loss},
                  {"masked_pixel_mse", masked_pixel_mse(r.reconstruction, patches, mask, model.norm_pix)},
                  {"mask", encode_rle(mask)}};
  write_json(out / "recon.json", info);
  ctx.write_run_json(out, {{"inputs", {{"checkpoint", file_fingerprint(cfg.paths.checkpoint)}}}});
  emit(info);
  return 0;
}

}  // namespace pixeldoc::cli
