#include <spdlog/spdlog.h>

#include "cli.hpp"
#include "pixeldoc/checkpoint.hpp"
#include "pixeldoc/errors.hpp"
#include "pixeldoc/manifest.hpp"

namespace pixeldoc::cli {

namespace {

DatasetManifest maybe_split(DatasetManifest m, double fraction, std::uint64_t seed) {
  if (fraction <= 0.0) return m;
  Rng rng = make_rng(seed, "split");
  return split_dataset(m, fraction, rng);
}

Json rects_json(const std::vector<MaskRect>& rects) {
  Json out = Json::array();
  for (const auto& r : rects) out.push_back({{"row", r.row}, {"col", r.col}, {"height", r.height}, {"width", r.width}});
  return out;
}

}  // namespace

int cmd_synth(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const fs::path out = ctx.output_dir();
  const Toolkit kit = Toolkit::from_config(cfg);
  const int n = cfg.synth.n;
  DatasetManifest manifest;
  manifest.entries.resize(n);
  parallel_for(n, ctx.threads, [&](int i) {
    SynthScan s = synth_scan(cfg, kit, i);
    const std::string rel = "images/scan_" + pad_index(i) + ".png";
    write_png(s.scan.pixels, out / rel);
    ManifestEntry& e = manifest.entries[i];
    e.path = rel;
    e.source = s.scan.meta.source_id;
    e.seed = s.scan.meta.seed;
    e.truth = s.scan.truth;
    if (cfg.synth.degrade) e.transform = s.transform;
  });
  manifest = maybe_split(std::move(manifest), cfg.synth.val_fraction, cfg.seed);
  write_manifest(out / "manifest.jsonl", manifest);
  ctx.write_run_json(out, {{"count", n}});
  emit({{"scans", n}, {"manifest", (out / "manifest.jsonl").string()}});
  return 0;
}

int cmd_corpus_ingest(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const fs::path pages_dir = require_input(cfg.paths.pages, "paths.pages");
  require(cfg.corpus.target_width == cfg.corpus.window, ErrorKind::ConfigInvalid,
          "corpus.target_width must equal corpus.window so crops are square");
  const auto pages = list_pngs(pages_dir);
  require(!pages.empty(), ErrorKind::EmptyCorpus, "no PNG pages in " + pages_dir.string());
  const fs::path out = ctx.output_dir();

  std::vector<std::vector<ManifestEntry>> per_page(pages.size());
  std::vector<int> skipped(pages.size(), 0);
  ColumnDetectConfig detect;
  detect.min_gutter = cfg.corpus.min_gutter;
  parallel_for(static_cast<int>(pages.size()), ctx.threads, [&](int p) {
    const Image page = read_png(pages[p]);
    const std::string stem = pages[p].stem().string();
    const LinearizedPage strip = linearize(page, detect_columns(page, detect), cfg.corpus.target_width);
    skipped[p] = strip.skipped;
    for (const Crop& c : sliding_crops(strip.strip, cfg.corpus.window, cfg.corpus.stride, cfg.corpus.anchor_bottom)) {
      const std::string rel = "crops/" + stem + "_" + pad_index(c.offset) + ".png";
      write_png(c.scan.pixels, out / rel);
      ManifestEntry e;
      e.path = rel;
      e.source = stem;
      e.crop_offset = c.offset;
      per_page[p].push_back(std::move(e));
    }
  });
  DatasetManifest manifest;
  Json inputs = Json::object();
  int total_skipped = 0;
  for (std::size_t p = 0; p < pages.size(); ++p) {
    for (auto& e : per_page[p]) manifest.entries.push_back(std::move(e));
    inputs[pages[p].filename().string()] = file_fingerprint(pages[p]);
    total_skipped += skipped[p];
  }
  if (total_skipped > 0) spdlog::warn("corpus ingest: dropped {} zero-area region(s)", total_skipped);
  manifest = maybe_split(std::move(manifest), cfg.corpus.val_fraction, cfg.seed);
  write_manifest(out / "manifest.jsonl", manifest);
  ctx.write_run_json(out, {{"inputs", inputs}, {"crops", manifest.entries.size()}});
  emit({{"pages", pages.size()}, {"crops", manifest.entries.size()}, {"manifest", (out / "manifest.jsonl").string()}});
  return 0;
}

int cmd_mask_preview(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  Image img;
  if (cfg.paths.probe.empty()) {
    img = synth_scan(cfg, Toolkit::from_config(cfg), 0).scan.pixels;
  } else {
    img = read_png(require_input(cfg.paths.probe, "paths.probe"));
  }
  const PatchGrid grid = PatchGrid::for_image(img.height(), img.width(), cfg.model.patch_size);
  Rng rng = make_rng(cfg.seed, "mask-preview");
  const SpanMask m = sample_span_mask(grid, cfg.mask, rng);
  const fs::path out = ctx.output_dir();
  write_png(overlay_mask(img, m.mask), out / "preview.png");
  const Json info{{"rle", encode_rle(m.mask)},
                  {"masked", m.mask.count()},
                  {"patches", grid.count()},
                  {"ratio", static_cast<double>(m.mask.count()) / grid.count()},
                  {"rects", rects_json(m.rects)}};
  write_json(out / "mask.json", info);
  ctx.write_run_json(out);
  emit(info);
  return 0;
}

int cmd_qa_build(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const fs::path out = ctx.output_dir();
  const Toolkit kit = Toolkit::from_config(cfg);
  const auto ocr = qa_ocr(cfg);
  const int n = cfg.qa.n;
  std::vector<Json> rows(n);
  std::vector<bool> has_answer(n);
  parallel_for(n, ctx.threads, [&](int i) {
    const QAInstance inst = qa_instance(cfg, kit, *ocr, i);
    const std::string rel = "images/qa_" + pad_index(i) + ".png";
    write_png(inst.image.pixels, out / rel);
    has_answer[i] = inst.has_answer;
    Json row{{"id", "qa_" + pad_index(i)},
             {"question", inst.question},
             {"answer", inst.answer},
             {"has_answer", inst.has_answer},
             {"image", rel},
             {"mask", encode_rle(inst.mask)},
             {"seed", inst.image.meta.seed},
             {"split", in_validation(i, n, cfg.qa.val_fraction) ? "validation" : "train"}};
    if (inst.match) row["match"] = {{"first", inst.match->first}, {"last", inst.match->last},
                                    {"distance", inst.match->distance}, {"normalized", inst.match->normalized}};
    rows[i] = std::move(row);
  });
  if (cfg.qa.balance) {
    Rng rng = make_rng(cfg.seed, "balance");
    std::vector<Json> kept;
    for (std::size_t i : balanced_indices(has_answer, rng)) kept.push_back(rows[i]);
    rows = std::move(kept);
  }
  int with = 0;
  for (const auto& r : rows) with += r["has_answer"].get<bool>() ? 1 : 0;
  write_jsonl(out / "qa.jsonl", rows);
  ctx.write_run_json(out, {{"count", rows.size()}});
  emit({{"instances", rows.size()}, {"with_answer", with}, {"without_answer", static_cast<int>(rows.size()) - with},
        {"dataset", (out / "qa.jsonl").string()}});
  return 0;
}

int cmd_seq_build(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const fs::path out = ctx.output_dir();
  const Toolkit kit = Toolkit::from_config(cfg);
  const auto vocab = corpus_vocab(kit.corpus);
  const int n = cfg.seq.n;
  std::vector<Json> rows(n);
  parallel_for(n, ctx.threads, [&](int i) {
    const SeqExample ex = seq_instance(cfg, kit, vocab, i);
    const std::string rel = "images/seq_" + pad_index(i) + ".png";
    write_png(ex.scan.pixels, out / rel);
    rows[i] = Json{{"id", "seq_" + pad_index(i)},
                   {"image", rel},
                   {"label", ex.label},
                   {"s1", ex.s1},
                   {"s2", ex.s2},
                   {"truncated", ex.truncated},
                   {"seed", ex.scan.meta.seed},
                   {"split", in_validation(i, n, cfg.seq.val_fraction) ? "validation" : "train"}};
  });
  write_jsonl(out / "seq.jsonl", rows);
  ctx.write_run_json(out, {{"count", n}, {"marker", cfg.seq.marker.empty() ? vocab.at(0) : cfg.seq.marker}});
  emit({{"instances", n}, {"dataset", (out / "seq.jsonl").string()}});
  return 0;
}

}  // namespace pixeldoc::cli
