#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pixeldoc/font.hpp"
#include "pixeldoc/image.hpp"

namespace pixeldoc {

/// One laid out line of text; `top` is the line box top, glyph cells are
/// vertically centred inside the line box.
struct PlacedLine {
  std::string text;
  double x = 0.0;
  int top = 0;
};

struct SpanPlan {
  std::string text;
  FontSpec font;
  int origin_y = 0;
  /// Rows consumed by the span's line boxes (may run past the canvas bottom).
  int height = 0;
  std::size_t paragraph = 0;
  /// Character offset inside the source paragraph where the span starts.
  std::size_t offset = 0;
  bool continuation = false;
  std::vector<PlacedLine> lines;
};

struct WordBox {
  std::string text;
  PixelBox box;

  friend bool operator==(const WordBox&, const WordBox&) = default;
};

/// Resolved layout of a scan before rasterization.
struct RenderPlan {
  int width = 0;
  int height = 0;
  std::vector<SpanPlan> spans;
  /// Tight ink boxes in reading order, clipped to the canvas.
  std::vector<WordBox> word_boxes;
  /// Words that did not fit on the canvas.
  bool truncated = false;
  /// Characters drawn with the fallback glyph.
  int missing_glyphs = 0;
};

struct ScanMeta {
  std::uint64_t seed = 0;
  std::string source_id;
  std::string split = "train";
};

struct Scan {
  Image pixels;
  ScanMeta meta;
  std::optional<RenderPlan> truth;
};

}  // namespace pixeldoc
