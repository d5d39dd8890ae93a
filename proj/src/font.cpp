#include "pixeldoc/font.hpp"

#include <algorithm>
#include <cmath>

#include "pixeldoc/errors.hpp"

namespace pixeldoc {

namespace {

int snap(double v) { return static_cast<int>(std::floor(v + 0.5)); }

int glyph_cols(const FontFace& face) { return face.embolden ? kGlyphCols + 1 : kGlyphCols; }

bool face_ink(const FontFace& face, const GlyphBitmap& g, int row, int col) {
  const bool own = col < kGlyphCols && g.ink(row, col);
  if (!face.embolden) return own;
  return own || (col > 0 && col - 1 < kGlyphCols && g.ink(row, col - 1));
}

}  // namespace

GlyphGeometry::GlyphGeometry(const FontFace& face, int size_px)
    : face_(&face),
      unit_(static_cast<double>(size_px) / kCellUnits),
      unit_x_(unit_ * face.x_scale),
      advance_(face.advance_units * unit_ * face.x_scale),
      line_height_(static_cast<int>(std::lround(1.2 * size_px))) {
  require(size_px > 0, ErrorKind::UsageError, "font size must be positive");
}

const GlyphBitmap& GlyphGeometry::glyph(char32_t cp) const {
  const GlyphBitmap* g = builtin_glyph(cp);
  return g != nullptr ? *g : fallback_glyph();
}

std::vector<InkRect> GlyphGeometry::ink_rects(char32_t cp, double pen_x, int top) const {
  const GlyphBitmap& g = glyph(cp);
  const int cols = glyph_cols(*face_);
  auto col_begin = [&](int c) { return snap(pen_x + c * unit_x_); };
  auto col_end = [&](int c) { return std::max(col_begin(c) + 1, col_begin(c + 1)); };
  auto row_begin = [&](int r) { return top + snap(r * unit_); };
  auto row_end = [&](int r) { return std::max(row_begin(r) + 1, row_begin(r + 1)); };

  std::vector<InkRect> rects;
  for (int r = 0; r < kGlyphRows; ++r) {
    int c = 0;
    while (c < cols) {
      if (!face_ink(*face_, g, r, c)) {
        ++c;
        continue;
      }
      const int start = c;
      while (c < cols && face_ink(*face_, g, r, c)) ++c;
      rects.push_back({col_begin(start), row_begin(r), col_end(c - 1), row_end(r)});
    }
  }
  return rects;
}

std::vector<GlyphGeometry::Cell> GlyphGeometry::ink_cells(char32_t cp, double pen_x, int top) const {
  const GlyphBitmap& g = glyph(cp);
  const int cols = glyph_cols(*face_);
  std::vector<Cell> cells;
  for (int r = 0; r < kGlyphRows; ++r)
    for (int c = 0; c < cols; ++c)
      if (face_ink(*face_, g, r, c))
        cells.push_back({pen_x + c * unit_x_, top + r * unit_, pen_x + (c + 1) * unit_x_,
                         top + (r + 1) * unit_});
  return cells;
}

FontRegistry FontRegistry::builtin() {
  FontRegistry reg;
  reg.add({"mono", 1.0, false, 6.0});
  reg.add({"mono-bold", 1.0, true, 7.0});
  reg.add({"mono-wide", 1.3, false, 6.0});
  reg.add({"mono-narrow", 0.85, false, 6.0});
  return reg;
}

void FontRegistry::add(FontFace face) {
  require(!face.family.empty(), ErrorKind::FontResolution, "font family name is empty");
  require(!contains(face.family), ErrorKind::FontResolution, "font family registered twice: " + face.family);
  faces_.push_back(std::move(face));
}

const FontFace& FontRegistry::resolve(std::string_view family) const {
  for (const auto& f : faces_)
    if (f.family == family) return f;
  fail(ErrorKind::FontResolution, "unregistered font family '" + std::string(family) + "'");
}

bool FontRegistry::contains(std::string_view family) const {
  return std::any_of(faces_.begin(), faces_.end(), [&](const FontFace& f) { return f.family == family; });
}

std::vector<std::string> FontRegistry::families() const {
  std::vector<std::string> out;
  for (const auto& f : faces_) out.push_back(f.family);
  return out;
}

void BitmapRasterizer::draw(Image& canvas, const GlyphGeometry& geom, char32_t cp, double pen_x,
                            int top) const {
  for (const InkRect& r : geom.ink_rects(cp, pen_x, top))
    for (int y = std::max(0, r.y0); y < std::min(canvas.height(), r.y1); ++y)
      for (int x = std::max(0, r.x0); x < std::min(canvas.width(), r.x1); ++x)
        for (int c = 0; c < canvas.channels(); ++c) canvas.at(y, x, c) = 0.0F;
}

void OutlineRasterizer::draw(Image& canvas, const GlyphGeometry& geom, char32_t cp, double pen_x,
                             int top) const {
  const auto cells = geom.ink_cells(cp, pen_x, top);
  if (cells.empty()) return;
  double gx0 = cells.front().x0, gy0 = cells.front().y0, gx1 = cells.front().x1, gy1 = cells.front().y1;
  for (const auto& c : cells) {
    gx0 = std::min(gx0, c.x0);
    gy0 = std::min(gy0, c.y0);
    gx1 = std::max(gx1, c.x1);
    gy1 = std::max(gy1, c.y1);
  }
  const int bx0 = std::max(0, static_cast<int>(std::floor(gx0)));
  const int by0 = std::max(0, static_cast<int>(std::floor(gy0)));
  const int bx1 = std::min(canvas.width(), static_cast<int>(std::ceil(gx1)));
  const int by1 = std::min(canvas.height(), static_cast<int>(std::ceil(gy1)));
  if (bx1 <= bx0 || by1 <= by0) return;

  const int w = bx1 - bx0;
  std::vector<double> coverage(static_cast<std::size_t>(w) * (by1 - by0), 0.0);
  for (const auto& cell : cells) {
    const int x_lo = std::max(bx0, static_cast<int>(std::floor(cell.x0)));
    const int x_hi = std::min(bx1, static_cast<int>(std::ceil(cell.x1)));
    const int y_lo = std::max(by0, static_cast<int>(std::floor(cell.y0)));
    const int y_hi = std::min(by1, static_cast<int>(std::ceil(cell.y1)));
    for (int y = y_lo; y < y_hi; ++y) {
      const double oy = std::min(cell.y1, y + 1.0) - std::max(cell.y0, static_cast<double>(y));
      if (oy <= 0) continue;
      for (int x = x_lo; x < x_hi; ++x) {
        const double ox = std::min(cell.x1, x + 1.0) - std::max(cell.x0, static_cast<double>(x));
        if (ox > 0) coverage[static_cast<std::size_t>(y - by0) * w + (x - bx0)] += ox * oy;
      }
    }
  }
  for (int y = by0; y < by1; ++y)
    for (int x = bx0; x < bx1; ++x) {
      const double cov = std::min(1.0, coverage[static_cast<std::size_t>(y - by0) * w + (x - bx0)]);
      if (cov <= 0) continue;
      const auto v = static_cast<float>(1.0 - cov);
      for (int c = 0; c < canvas.channels(); ++c) canvas.at(y, x, c) = std::min(canvas.at(y, x, c), v);
    }
}

std::unique_ptr<GlyphRasterizer> make_rasterizer(std::string_view name) {
  if (name == "bitmap") return std::make_unique<BitmapRasterizer>();
  if (name == "outline") return std::make_unique<OutlineRasterizer>();
  fail(ErrorKind::UsageError, "unknown rasterizer '" + std::string(name) + "'");
}

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b = static_cast<unsigned char>(s[i]);
    int extra = 0;
    char32_t cp = 0;
    if (b < 0x80) {
      cp = b;
    } else if ((b & 0xE0) == 0xC0) {
      cp = b & 0x1F;
      extra = 1;
    } else if ((b & 0xF0) == 0xE0) {
      cp = b & 0x0F;
      extra = 2;
    } else if ((b & 0xF8) == 0xF0) {
      cp = b & 0x07;
      extra = 3;
    } else {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    bool ok = true;
    for (int k = 1; k <= extra; ++k) {
      if (i + k >= s.size()) {
        ok = false;
        break;
      }
      const auto cb = static_cast<unsigned char>(s[i + k]);
      if ((cb & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cb & 0x3F);
    }
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

std::string encode_utf8(std::u32string_view s) {
  std::string out;
  for (char32_t cp : s) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }
  return out;
}

}  // namespace pixeldoc
