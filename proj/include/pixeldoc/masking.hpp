#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pixeldoc/image.hpp"
#include "pixeldoc/rng.hpp"

namespace pixeldoc {

/// Patch lattice over an image: rows x cols patches of patch_size pixels.
struct PatchGrid {
  int rows = 23;
  int cols = 23;
  int patch_size = 16;

  int count() const { return rows * cols; }
  int height_px() const { return rows * patch_size; }
  int width_px() const { return cols * patch_size; }

  /// Grid for an image; throws ShapeMismatch unless both sides divide evenly.
  static PatchGrid for_image(int height, int width, int patch_size = 16);

  friend bool operator==(const PatchGrid&, const PatchGrid&) = default;
};

/// One boolean per patch, row-major.
class PatchMask {
 public:
  PatchMask() = default;
  explicit PatchMask(PatchGrid grid) : grid_(grid), bits_(grid.count(), 0) {}

  const PatchGrid& grid() const { return grid_; }
  bool get(int r, int c) const { return bits_[index(r, c)] != 0; }
  void set(int r, int c, bool v = true) { bits_[index(r, c)] = v ? 1 : 0; }
  bool operator[](int i) const { return bits_[i] != 0; }
  void set_flat(int i, bool v) { bits_[i] = v ? 1 : 0; }

  int count() const;
  bool any() const { return count() > 0; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  /// Moves every bit down by `rows` patch rows; bits pushed past the bottom are dropped.
  PatchMask shifted_down(int rows) const;
  /// Number of patches set in both masks.
  int intersection(const PatchMask& o) const;
  int union_count(const PatchMask& o) const;

  friend bool operator==(const PatchMask&, const PatchMask&) = default;

 private:
  int index(int r, int c) const { return r * grid_.cols + c; }

  PatchGrid grid_;
  std::vector<std::uint8_t> bits_;
};

/// A patch-aligned occlusion rectangle (in patch units).
struct MaskRect {
  int row = 0;
  int col = 0;
  int height = 0;
  int width = 0;
};

struct SpanMaskConfig {
  double ratio = 0.28;
  int min_width = 2;
  int max_width = 6;
  int min_height = 2;
  int max_height = 4;
  /// Unmask random patches after overshoot so exactly round(ratio * P) remain.
  bool trim = true;
};

struct SpanMask {
  PatchMask mask;
  std::vector<MaskRect> rects;
};

/// Unions uniformly sized and placed rectangles until the coverage reaches
/// `ratio`, then optionally trims back to the exact count.
SpanMask sample_span_mask(const PatchGrid& grid, const SpanMaskConfig& cfg, Rng& rng);

/// Sets every patch whose pixel area overlaps some box with positive area.
PatchMask boxes_to_mask(std::span<const PixelBox> boxes, const PatchGrid& grid);

/// "RxC:n0,n1,..." with alternating run lengths, starting with a run of zeros.
std::string encode_rle(const PatchMask& mask);
PatchMask decode_rle(std::string_view text);

/// Greys out the masked patches and outlines them, for previews.
Image overlay_mask(const Image& scan, const PatchMask& mask);

}  // namespace pixeldoc
