#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pixeldoc/degrade.hpp"
#include "pixeldoc/font.hpp"
#include "pixeldoc/rng.hpp"
#include "pixeldoc/scan.hpp"

namespace pixeldoc {

/// Newline-delimited paragraphs; blank lines are dropped.
class ParagraphCorpus {
 public:
  ParagraphCorpus() = default;
  explicit ParagraphCorpus(std::vector<std::string> paragraphs, bool wrap = false);
  static ParagraphCorpus from_text(std::string_view text, bool wrap = false);
  static ParagraphCorpus from_file(const std::filesystem::path& path, bool wrap = false);

  std::size_t size() const { return paragraphs_.size(); }
  bool empty() const { return paragraphs_.empty(); }
  const std::string& operator[](std::size_t i) const { return paragraphs_[i]; }
  /// Continuing past the last paragraph restarts at the first one.
  bool wraps() const { return wrap_; }

 private:
  std::vector<std::string> paragraphs_;
  bool wrap_ = false;
};

struct LayoutConfig {
  int width = 368;
  int height = 368;
  int margin = 2;
  /// Another span is appended while the unfilled share of rows exceeds this.
  double empty_threshold = 0.10;
  /// Probability that an appended span keeps the font and takes the next paragraph.
  double continue_prob = 0.8;
  int min_font = 12;
  int max_font = 32;
  /// Families to sample from; empty means every registered family.
  std::vector<std::string> families;
  /// Random start offsets snap to word starts (otherwise any character).
  bool word_aligned_offset = true;
};

/// Fills a canvas with paragraph spans.  The last line of the final span may
/// run past the bottom edge and is clipped there.
RenderPlan layout_paragraphs(const ParagraphCorpus& corpus, Rng& rng, const LayoutConfig& cfg,
                             const FontRegistry& fonts);

/// Share of canvas rows not covered by any span's line boxes.
double empty_row_fraction(const RenderPlan& plan);

/// Lays out `text` starting at `origin_y`, greedy word wrap.  Returns the span
/// and appends word boxes to `boxes`.  With `clip_last_line` a final line that
/// only partly fits is still placed; otherwise such lines are dropped and
/// `truncated` is set.
SpanPlan layout_block(std::string_view text, const FontSpec& font, int origin_y, int width, int height,
                      int margin, const FontRegistry& fonts, bool clip_last_line,
                      std::vector<WordBox>& boxes, bool& truncated, int& missing_glyphs);

Scan rasterize(const RenderPlan& plan, const FontRegistry& fonts, const GlyphRasterizer& backend);

struct PairConfig {
  int width = 64;
  int height = 64;
  int margin = 2;
  FontSpec clean_font{"mono", 12};
  int min_font = 12;
  int max_font = 32;
  /// Smallest size tried when shrinking an overflowing noisy rendering.
  int shrink_floor = 8;
  std::vector<std::string> families;
  DegradationConfig degrade;
};

struct RenderedPair {
  Scan scan;
  bool truncated = false;
  AppliedTransform transform;
};

/// Renders s1, then s2 on a new line.  Clean: fixed default font and no
/// degradation.  Noisy: sampled font then the degradation pipeline.
RenderedPair render_pair(std::string_view s1, const std::optional<std::string>& s2, bool noisy, Rng& rng,
                         const PairConfig& cfg, const FontRegistry& fonts, const GlyphRasterizer& backend);

}  // namespace pixeldoc
