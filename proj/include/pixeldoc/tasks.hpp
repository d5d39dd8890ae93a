#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pixeldoc/degrade.hpp"
#include "pixeldoc/masking.hpp"
#include "pixeldoc/model.hpp"
#include "pixeldoc/render.hpp"
#include "pixeldoc/scan.hpp"

namespace pixeldoc {

// ---------------------------------------------------------------------------
// OCR

struct OcrResult {
  /// Words joined by single spaces.
  std::string text;
  std::vector<WordBox> words;
};

class OcrEngine {
 public:
  virtual ~OcrEngine() = default;
  virtual std::string name() const = 0;
  virtual OcrResult recognize(const Scan& scan) const = 0;
};

/// Reads the scan's truth word boxes; throws NoTruth without them.
class GroundTruthOcr final : public OcrEngine {
 public:
  std::string name() const override { return "ground_truth"; }
  OcrResult recognize(const Scan& scan) const override;
};

/// Ground truth with per-character substitution probability p and per-word
/// drop probability p/2.  Errors are a pure function of (seed, scan seed).
class NoisyOcr final : public OcrEngine {
 public:
  explicit NoisyOcr(double p, std::uint64_t seed = 0);
  std::string name() const override;
  OcrResult recognize(const Scan& scan) const override;
  double p() const { return p_; }

 private:
  double p_;
  std::uint64_t seed_;
};

/// "ground_truth", "noisy" or "noisy:<p>".
std::unique_ptr<OcrEngine> make_ocr(std::string_view spec, std::uint64_t seed = 0);

OcrResult ocr_from_words(std::vector<WordBox> words);

// ---------------------------------------------------------------------------
// Fuzzy alignment

/// Levenshtein distance over code points.
int edit_distance(std::u32string_view a, std::u32string_view b);

struct SpanMatch {
  /// Inclusive word indices into the OCR result.
  int first = 0;
  int last = 0;
  int distance = 0;
  double normalized = 0.0;
};

/// Word span minimizing edit distance to `answer` (leftmost, then shortest on
/// ties); nullopt when its distance / max(len(answer), len(span)) exceeds
/// `max_norm_dist`.  Throws UsageError on an empty answer.
std::optional<SpanMatch> fuzzy_locate(std::string_view answer, const OcrResult& ocr, double max_norm_dist = 0.3);

// ---------------------------------------------------------------------------
// QA instances

struct QaBuildConfig {
  int width = 64;
  int height = 64;
  int patch_size = 16;
  int margin = 2;
  FontSpec question_font{"mono", 12};
  FontSpec context_font{"mono", 12};
  /// Noisy rendering: sampled context font and the degradation pipeline.
  bool noisy = false;
  int min_font = 12;
  int max_font = 16;
  std::vector<std::string> families;
  DegradationConfig degrade;
  double max_norm_dist = 0.3;
};

struct QAInstance {
  std::string question;
  /// Empty when has_answer is false.
  std::string answer;
  bool has_answer = false;
  Scan image;
  PatchMask mask;
  /// Patch rows taken by the question band.
  int question_rows = 0;
  std::optional<SpanMatch> match;
  AppliedTransform transform;
};

/// Renders the context, OCRs it, aligns the answer, converts the matched word
/// boxes to a patch mask, degrades (noisy config) with mask transport, stacks
/// a clean question band on top and crops to the canvas height.
QAInstance build_qa_instance(std::string_view question, std::string_view context, std::string_view answer,
                             const QaBuildConfig& cfg, const OcrEngine& ocr, Rng& rng, const FontRegistry& fonts,
                             const GlyphRasterizer& backend);

/// Height in pixels of the question band for `question`.
int question_band_height(std::string_view question, const QaBuildConfig& cfg, const FontRegistry& fonts);

Example<float> qa_example(const QAInstance& inst);

struct QAMetrics {
  double binary_acc = 0.0;
  double patch_acc = 0.0;
  double one_overlap = 0.0;
  int n_with_answer = 0;
  int n_without = 0;
};

PatchMask threshold_mask(std::span<const float> probs, const PatchGrid& grid, double threshold = 0.5);

QAMetrics qa_metrics(const std::vector<std::vector<float>>& pred, const std::vector<PatchMask>& truth,
                     double threshold = 0.5);
QAMetrics qa_metrics(const std::vector<std::vector<float>>& pred, const std::vector<QAInstance>& truth,
                     double threshold = 0.5);

/// Indices (ascending) of a subset with equal counts of true and false flags;
/// the majority is downsampled uniformly.  Throws OneClassOnly.
std::vector<std::size_t> balanced_indices(const std::vector<bool>& has_answer, Rng& rng);
std::vector<QAInstance> balance_test_set(std::vector<QAInstance> instances, Rng& rng);

// ---------------------------------------------------------------------------
// Synthetic text sources

struct SyntheticQaConfig {
  /// Filler words per context.
  int min_words = 2;
  int max_words = 4;
  double answerable_prob = 0.5;
};

struct QaText {
  std::string question;
  std::string context;
  /// The answer the question asks for; absent from the context when not answerable.
  std::string answer;
  bool answerable = false;
};

/// Lowercase filler contexts; answerable ones contain a four-digit year that
/// the question asks for.
QaText synth_qa_text(Rng& rng, const SyntheticQaConfig& cfg = {});

struct SeqExample {
  std::string s1;
  std::string s2;
  int label = 0;
  Scan scan;
  bool truncated = false;
};

struct SeqTaskConfig {
  PairConfig pair;
  /// Defaults to vocab[0].
  std::string marker;
  double marker_prob = 0.5;
  int min_words = 1;
  int max_words = 3;
};

/// Sentence pairs over `vocab` rendered with render_pair; label 1 iff the
/// marker word appears in s2.
std::vector<SeqExample> synth_seq_task(const std::vector<std::string>& vocab, int n, bool noisy, Rng& rng,
                                       const SeqTaskConfig& cfg, const FontRegistry& fonts,
                                       const GlyphRasterizer& backend);

}  // namespace pixeldoc
