#include <spdlog/spdlog.h>

#include "cli.hpp"
#include "pixeldoc/checkpoint.hpp"
#include "pixeldoc/errors.hpp"
#include "pixeldoc/manifest.hpp"
#include "pixeldoc/search.hpp"

namespace pixeldoc::cli {

int cmd_embed(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const fs::path ckpt = require_input(cfg.paths.checkpoint, "paths.checkpoint");
  const ModelParams<float> params = load_checkpoint(ckpt);

  std::vector<std::string> ids;
  std::vector<fs::path> files;
  if (!cfg.paths.scans.empty()) {
    const fs::path dir = require_input(cfg.paths.scans, "paths.scans");
    for (const auto& f : list_pngs(dir)) {
      ids.push_back(f.filename().string());
      files.push_back(f);
    }
  } else {
    const fs::path manifest = require_input(cfg.paths.manifest, "paths.scans or paths.manifest");
    for (const auto& e : read_manifest(manifest).entries) {
      ids.push_back(e.path);
      files.push_back(manifest.parent_path() / e.path);
    }
  }
  require(!files.empty(), ErrorKind::EmptyCorpus, "embed: no scans found");

  std::vector<std::vector<float>> vectors(files.size());
  parallel_for(static_cast<int>(files.size()), ctx.threads,
               [&](int i) { vectors[i] = embed(params, load_model_image(files[i], params.config)); });
  EmbeddingIndex index(params.config.width, file_fingerprint(ckpt));
  for (std::size_t i = 0; i < files.size(); ++i) index.add(ids[i], vectors[i]);

  require(!cfg.paths.output.empty(), ErrorKind::UsageError, "embed: --out is required");
  fs::path index_path(cfg.paths.output);
  if (index_path.extension() != ".pxix") index_path /= "index.pxix";
  const fs::path dir = index_path.has_parent_path() ? index_path.parent_path() : fs::path(".");
  fs::create_directories(dir);
  index.save(index_path);
  ctx.write_run_json(dir, {{"index", index_path.filename().string()},
                           {"checkpoint", fs::absolute(ckpt).string()},
                           {"inputs", {{"checkpoint", index.fingerprint()}}}});
  emit({{"entries", index.size()}, {"index", index_path.string()}, {"fingerprint", index.fingerprint()}});
  return 0;
}

int cmd_search(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const fs::path index_path = require_input(cfg.paths.index, "paths.index");
  const EmbeddingIndex index = EmbeddingIndex::load(index_path);
  fs::path ckpt;
  if (!cfg.paths.checkpoint.empty()) {
    ckpt = require_input(cfg.paths.checkpoint, "paths.checkpoint");
  } else {
    const fs::path run = index_path.parent_path() / "run.json";
    require(fs::exists(run), ErrorKind::UsageError, "search: --ckpt is required (no run.json next to the index)");
    try {
      ckpt = Json::parse(read_file(run)).at("checkpoint").get<std::string>();
    } catch (const Json::exception& e) {
      fail(ErrorKind::Format, run.string() + ": " + e.what());
    }
  }
  const std::string fp = file_fingerprint(ckpt);
  require(fp == index.fingerprint(), ErrorKind::Format,
          "search: checkpoint fingerprint " + fp + " does not match the index (" + index.fingerprint() + ")");
  const ModelParams<float> params = load_checkpoint(ckpt);
  const fs::path probe = require_input(cfg.paths.probe, "paths.probe");
  const auto v = embed(params, load_model_image(probe, params.config));
  std::size_t k = static_cast<std::size_t>(cfg.k);
  if (k > index.size()) {
    spdlog::warn("search: k = {} exceeds the index size {}; returning every entry", k, index.size());
    k = index.size();
  }
  Json hits = Json::array();
  for (const Hit& h : index.query(v, k)) hits.push_back({{"id", h.id}, {"cosine", h.cosine}});
  emit({{"probe", probe.string()}, {"hits", hits}});
  return 0;
}

}  // namespace pixeldoc::cli
