#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pixeldoc/config.hpp"
#include "pixeldoc/corpus.hpp"
#include "pixeldoc/degrade.hpp"
#include "pixeldoc/render.hpp"
#include "pixeldoc/tasks.hpp"
#include "pixeldoc/train.hpp"

namespace pixeldoc {

/// Fonts, backend and text corpus resolved from a run config.
struct Toolkit {
  FontRegistry fonts = FontRegistry::builtin();
  std::unique_ptr<GlyphRasterizer> backend;
  ParagraphCorpus corpus;

  /// Uses the built-in sample corpus when paths.corpus is empty.
  static Toolkit from_config(const RunConfig& cfg);
};

/// Runs fn(i) for i in [0, n) on up to `threads` workers.  Rethrows the
/// failure with the lowest index once every worker has stopped.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

/// Worker count from PIXELDOC_THREADS, else the hardware concurrency.
int default_threads();

struct SynthScan {
  Scan scan;
  AppliedTransform transform;
};

/// Scan `index` of the synthetic dataset: layout, rasterize and (when
/// synth.degrade) degrade, all from the stream (seed, "synth", index).
SynthScan synth_scan(const RunConfig& cfg, const Toolkit& kit, int index);

QaBuildConfig qa_build_config(const RunConfig& cfg);
std::unique_ptr<OcrEngine> qa_ocr(const RunConfig& cfg);
/// QA instance `index` from the stream (seed, "qa", index).
QAInstance qa_instance(const RunConfig& cfg, const Toolkit& kit, const OcrEngine& ocr, int index);

/// Lowercase alphabetic words of the corpus, at least three letters, in
/// order of first appearance.
std::vector<std::string> corpus_vocab(const ParagraphCorpus& corpus);
SeqTaskConfig seq_task_config(const RunConfig& cfg);
/// Sentence-pair instance `index` from the stream (seed, "seq", index).
SeqExample seq_instance(const RunConfig& cfg, const Toolkit& kit, const std::vector<std::string>& vocab, int index);

/// Instances at index >= n - round(fraction * n) form the validation split.
bool in_validation(int index, int n, double fraction);

Schedule schedule_from(const OptimConfig& o);
AdamWConfig adamw_from(const OptimConfig& o);

}  // namespace pixeldoc
