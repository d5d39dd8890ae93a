#include "pixeldoc/masking.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "pixeldoc/errors.hpp"

namespace pixeldoc {

PatchGrid PatchGrid::for_image(int height, int width, int patch_size) {
  require(patch_size > 0, ErrorKind::ShapeMismatch, "patch size must be positive");
  require(height > 0 && width > 0 && height % patch_size == 0 && width % patch_size == 0,
          ErrorKind::ShapeMismatch,
          "image " + std::to_string(height) + "x" + std::to_string(width) +
              " is not a multiple of patch size " + std::to_string(patch_size));
  return {height / patch_size, width / patch_size, patch_size};
}

int PatchMask::count() const {
  return static_cast<int>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

PatchMask PatchMask::shifted_down(int rows) const {
  PatchMask out(grid_);
  for (int r = 0; r < grid_.rows; ++r) {
    const int dst = r + rows;
    if (dst < 0 || dst >= grid_.rows) continue;
    for (int c = 0; c < grid_.cols; ++c) out.set(dst, c, get(r, c));
  }
  return out;
}

int PatchMask::intersection(const PatchMask& o) const {
  require(grid_ == o.grid_, ErrorKind::ShapeMismatch, "mask grids differ");
  int n = 0;
  for (std::size_t i = 0; i < bits_.size(); ++i) n += bits_[i] & o.bits_[i];
  return n;
}

int PatchMask::union_count(const PatchMask& o) const {
  require(grid_ == o.grid_, ErrorKind::ShapeMismatch, "mask grids differ");
  int n = 0;
  for (std::size_t i = 0; i < bits_.size(); ++i) n += bits_[i] | o.bits_[i];
  return n;
}

SpanMask sample_span_mask(const PatchGrid& grid, const SpanMaskConfig& cfg, Rng& rng) {
  require(cfg.ratio > 0.0 && cfg.ratio < 1.0, ErrorKind::UsageError, "mask ratio must lie in (0, 1)");
  require(cfg.min_width >= 1 && cfg.min_width <= cfg.max_width && cfg.min_height >= 1 &&
              cfg.min_height <= cfg.max_height,
          ErrorKind::UsageError, "mask rectangle ranges must be ordered and positive");

  const int total = grid.count();
  const int target = static_cast<int>(std::ceil(cfg.ratio * total - 1e-9));
  const int max_w = std::min(cfg.max_width, grid.cols);
  const int min_w = std::min(cfg.min_width, max_w);
  const int max_h = std::min(cfg.max_height, grid.rows);
  const int min_h = std::min(cfg.min_height, max_h);

  SpanMask out{PatchMask(grid), {}};
  int covered = 0;
  while (covered < target) {
    MaskRect rect;
    rect.width = uniform_int(rng, min_w, max_w);
    rect.height = uniform_int(rng, min_h, max_h);
    rect.row = uniform_int(rng, 0, grid.rows - rect.height);
    rect.col = uniform_int(rng, 0, grid.cols - rect.width);
    for (int r = rect.row; r < rect.row + rect.height; ++r)
      for (int c = rect.col; c < rect.col + rect.width; ++c)
        if (!out.mask.get(r, c)) {
          out.mask.set(r, c);
          ++covered;
        }
    out.rects.push_back(rect);
  }

  if (cfg.trim) {
    const int exact = static_cast<int>(std::lround(cfg.ratio * total));
    std::vector<int> masked;
    for (int i = 0; i < total; ++i)
      if (out.mask[i]) masked.push_back(i);
    std::shuffle(masked.begin(), masked.end(), rng);
    for (int k = 0; k < covered - exact; ++k) out.mask.set_flat(masked[k], false);
  }
  return out;
}

PatchMask boxes_to_mask(std::span<const PixelBox> boxes, const PatchGrid& grid) {
  PatchMask mask(grid);
  const PixelBox canvas{0, 0, grid.width_px(), grid.height_px()};
  const int ps = grid.patch_size;
  for (const PixelBox& raw : boxes) {
    const PixelBox b = raw.intersect(canvas);
    if (b.empty()) continue;
    for (int r = b.y0 / ps; r <= (b.y1 - 1) / ps; ++r)
      for (int c = b.x0 / ps; c <= (b.x1 - 1) / ps; ++c) mask.set(r, c);
  }
  return mask;
}

std::string encode_rle(const PatchMask& mask) {
  std::string out = std::to_string(mask.grid().rows) + "x" + std::to_string(mask.grid().cols) + ":";
  const auto& bits = mask.bits();
  std::uint8_t current = 0;
  int run = 0;
  bool first = true;
  auto emit = [&] {
    if (!first) out += ',';
    out += std::to_string(run);
    first = false;
  };
  for (std::uint8_t b : bits) {
    if (b != current) {
      emit();
      current = b;
      run = 0;
    }
    ++run;
  }
  emit();
  return out;
}

PatchMask decode_rle(std::string_view text) {
  auto bad = [&](const std::string& why) {
    fail(ErrorKind::Format, "mask RLE '" + std::string(text) + "': " + why);
  };
  auto parse_int = [&](std::string_view s) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || v < 0) bad("bad number");
    return v;
  };
  const auto colon = text.find(':');
  const auto x = text.find('x');
  if (colon == std::string_view::npos || x == std::string_view::npos || x > colon) bad("missing header");
  PatchGrid grid;
  grid.rows = parse_int(text.substr(0, x));
  grid.cols = parse_int(text.substr(x + 1, colon - x - 1));
  PatchMask mask(grid);
  std::string_view rest = text.substr(colon + 1);
  int pos = 0;
  bool value = false;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const int run = parse_int(rest.substr(0, comma));
    if (pos + run > grid.count()) bad("runs exceed grid");
    for (int i = 0; i < run; ++i) mask.set_flat(pos + i, value);
    pos += run;
    value = !value;
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  if (pos != grid.count()) bad("runs do not cover grid");
  return mask;
}

Image overlay_mask(const Image& scan, const PatchMask& mask) {
  Image out = scan;
  const int ps = mask.grid().patch_size;
  for (int r = 0; r < mask.grid().rows; ++r)
    for (int c = 0; c < mask.grid().cols; ++c) {
      if (!mask.get(r, c)) continue;
      for (int y = r * ps; y < (r + 1) * ps && y < out.height(); ++y)
        for (int x = c * ps; x < (c + 1) * ps && x < out.width(); ++x) {
          const bool edge_top = y == r * ps && (r == 0 || !mask.get(r - 1, c));
          const bool edge_bottom = y == (r + 1) * ps - 1 && (r + 1 == mask.grid().rows || !mask.get(r + 1, c));
          const bool edge_left = x == c * ps && (c == 0 || !mask.get(r, c - 1));
          const bool edge_right = x == (c + 1) * ps - 1 && (c + 1 == mask.grid().cols || !mask.get(r, c + 1));
          for (int ch = 0; ch < out.channels(); ++ch) {
            float& v = out.at(y, x, ch);
            v = (edge_top || edge_bottom || edge_left || edge_right) ? 0.0F : 0.55F + 0.25F * v;
          }
        }
    }
  return out;
}

}  // namespace pixeldoc
