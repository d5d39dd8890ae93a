#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pixeldoc/config.hpp"
#include "pixeldoc/pipeline.hpp"

namespace pixeldoc::cli {

namespace fs = std::filesystem;
using Json = nlohmann::json;

struct Context {
  std::string command;
  RunConfig cfg;
  Json resolved;
  int threads = 1;

  fs::path output_dir() const;
  /// Writes run.json into `dir` with the resolved config plus `extra`.
  void write_run_json(const fs::path& dir, const Json& extra = Json::object()) const;
};

inline constexpr const char* kVersion = "0.3.0";

/// Six-digit zero padded index used in generated file names.
std::string pad_index(int i);
/// Path of an input that must exist; UsageError when unset, Io when missing.
fs::path require_input(const std::string& path, const std::string& key);
/// Sorted PNG files of a directory.
std::vector<fs::path> list_pngs(const fs::path& dir);
/// Grayscale image resized to the model input when its size differs.
Image load_model_image(const fs::path& path, const ModelConfig& model);
Image fit_to_model(const Image& img, const ModelConfig& model);
/// Prints one JSON document on stdout.
void emit(const Json& j);
void write_json(const fs::path& path, const Json& j);

struct TaskItem {
  std::string id;
  Image image;
  PatchMask mask;
  int label = 0;
  std::string split = "train";
};

/// Rows of qa.jsonl or seq.jsonl, images resolved next to the file.
std::vector<TaskItem> load_task_items(const fs::path& jsonl, const ModelConfig& model, bool qa);

int cmd_synth(const Context& ctx);
int cmd_corpus_ingest(const Context& ctx);
int cmd_mask_preview(const Context& ctx);
int cmd_qa_build(const Context& ctx);
int cmd_seq_build(const Context& ctx);
int cmd_pretrain(const Context& ctx);
int cmd_finetune_seq(const Context& ctx);
int cmd_finetune_qa(const Context& ctx);
int cmd_eval_qa(const Context& ctx);
int cmd_recon_dump(const Context& ctx);
int cmd_embed(const Context& ctx);
int cmd_search(const Context& ctx);

}  // namespace pixeldoc::cli
