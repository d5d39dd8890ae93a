#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pixeldoc/degrade.hpp"
#include "pixeldoc/masking.hpp"
#include "pixeldoc/model.hpp"
#include "pixeldoc/render.hpp"

namespace pixeldoc {

struct PathsConfig {
  std::string corpus;
  std::string output;
  std::string checkpoint;
  std::string manifest;
  std::string scans;
  std::string pages;
  std::string index;
  std::string probe;
  std::string predictions;
};

struct OptimConfig {
  double lr = 1.5e-4;
  double min_lr = 1e-5;
  int warmup = 50;
  int steps = 1000;
  int batch = 8;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct CorpusConfig {
  int window = 368;
  int stride = 128;
  int target_width = 368;
  double val_fraction = 0.05;
  bool anchor_bottom = false;
  int min_gutter = 12;
};

struct SynthConfig {
  int n = 10;
  bool degrade = true;
  double val_fraction = 0.05;
};

struct PretrainConfig {
  /// Draw one mask per scan up front instead of a fresh mask every step.
  bool fixed_masks = false;
};

struct QaConfig {
  int n = 64;
  bool noisy = false;
  std::string ocr = "ground_truth";
  double max_norm_dist = 0.3;
  double threshold = 0.5;
  bool balance = false;
  int min_words = 2;
  int max_words = 4;
  double answerable_prob = 0.5;
  int min_font = 12;
  int max_font = 16;
  /// Share of instances held out for evaluation.
  double val_fraction = 0.2;
};

struct SeqConfig {
  int n = 64;
  bool noisy = false;
  std::string marker;
  double marker_prob = 0.5;
  int min_words = 1;
  int max_words = 3;
  double val_fraction = 0.2;
};

/// Every knob of every subcommand.  Defaults form the desk profile: 64 px
/// canvases matching the default model input.
struct RunConfig {
  std::uint64_t seed = 0;
  PathsConfig paths;
  ModelConfig model;
  LayoutConfig render = desk_layout();
  std::string backend = "bitmap";
  DegradationConfig degrade;
  SpanMaskConfig mask;
  OptimConfig optim;
  CorpusConfig corpus;
  SynthConfig synth;
  PretrainConfig pretrain;
  QaConfig qa;
  SeqConfig seq;
  int k = 10;

  static LayoutConfig desk_layout();
  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Strict: unknown keys and wrong types raise ConfigInvalid naming the key path.
RunConfig run_config_from_json(const nlohmann::json& j);

/// Overlays `patch` on `base`; keys absent from `base` are rejected.
void merge_config(nlohmann::json& base, const nlohmann::json& patch, const std::string& where = "");
/// Sets a dotted key from a command-line string.  String-typed keys take the
/// text verbatim; others parse it as JSON.
void set_config_value(nlohmann::json& tree, const std::string& dotted_key, const std::string& text);

}  // namespace pixeldoc
