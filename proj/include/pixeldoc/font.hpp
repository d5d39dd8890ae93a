#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "pixeldoc/image.hpp"

namespace pixeldoc {

/// Glyphs are authored on a 5 x 9 unit grid inside a cell 10 units tall.
/// Rows 0..6 sit above the baseline, rows 7..8 hold descenders.
inline constexpr int kGlyphCols = 5;
inline constexpr int kGlyphRows = 9;
inline constexpr int kCellUnits = 10;

struct GlyphBitmap {
  std::array<std::uint8_t, kGlyphRows> rows{};  // bit (kGlyphCols - 1 - x) set = ink at column x

  bool ink(int row, int col) const { return ((rows[row] >> (kGlyphCols - 1 - col)) & 1U) != 0; }
  bool blank() const;
};

/// Glyph shape for an ASCII code point in the built-in font; nullptr if absent.
const GlyphBitmap* builtin_glyph(char32_t cp);
/// Hollow box used for code points the font does not cover.
const GlyphBitmap& fallback_glyph();

/// A registered typeface: the built-in glyph set with a style transform.
struct FontFace {
  std::string family;
  /// Horizontal stretch of the unit grid.
  double x_scale = 1.0;
  /// Extra ink unit to the right of every ink unit (bold).
  bool embolden = false;
  /// Advance in units, before x_scale.
  double advance_units = 6.0;
};

struct FontSpec {
  std::string family = "mono";
  int size_px = 12;

  friend bool operator==(const FontSpec&, const FontSpec&) = default;
};

/// Axis-aligned ink rectangle of a placed glyph, in pixels (half-open).
struct InkRect {
  int x0, y0, x1, y1;
};

/// Pixel geometry of glyphs shared by the layout engine and every backend.
class GlyphGeometry {
 public:
  GlyphGeometry(const FontFace& face, int size_px);

  double unit() const { return unit_; }
  double advance() const { return advance_; }
  int line_height() const { return line_height_; }

  /// Ink rectangles (pixel snapped) for a glyph whose cell top-left is at (pen_x, top).
  std::vector<InkRect> ink_rects(char32_t cp, double pen_x, int top) const;
  /// Unit rectangles in continuous coordinates, for coverage based backends.
  struct Cell {
    double x0, y0, x1, y1;
  };
  std::vector<Cell> ink_cells(char32_t cp, double pen_x, int top) const;

  const GlyphBitmap& glyph(char32_t cp) const;

 private:
  const FontFace* face_;
  double unit_;
  double unit_x_;
  double advance_;
  int line_height_;
};

/// Immutable set of registered font faces.
class FontRegistry {
 public:
  /// Registry holding the built-in faces: mono, mono-bold, mono-wide, mono-narrow.
  static FontRegistry builtin();

  void add(FontFace face);
  const FontFace& resolve(std::string_view family) const;
  bool contains(std::string_view family) const;
  std::vector<std::string> families() const;

 private:
  std::vector<FontFace> faces_;
};

/// Draws glyphs onto a canvas.  Backends share GlyphGeometry so the word
/// boxes computed by the layout engine hold for all of them.
class GlyphRasterizer {
 public:
  virtual ~GlyphRasterizer() = default;
  virtual std::string_view name() const = 0;
  virtual void draw(Image& canvas, const GlyphGeometry& geom, char32_t cp, double pen_x, int top) const = 0;
};

/// Nearest-neighbour rendering of the unit grid: hard black ink.
class BitmapRasterizer final : public GlyphRasterizer {
 public:
  std::string_view name() const override { return "bitmap"; }
  void draw(Image& canvas, const GlyphGeometry& geom, char32_t cp, double pen_x, int top) const override;
};

/// Treats each glyph as a union of vector rectangles and renders exact area
/// coverage, giving anti-aliased edges.
class OutlineRasterizer final : public GlyphRasterizer {
 public:
  std::string_view name() const override { return "outline"; }
  void draw(Image& canvas, const GlyphGeometry& geom, char32_t cp, double pen_x, int top) const override;
};

std::unique_ptr<GlyphRasterizer> make_rasterizer(std::string_view name);

/// Decodes UTF-8; malformed bytes become U+FFFD.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);

}  // namespace pixeldoc
