#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pixeldoc {

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  PixelBox intersect(const PixelBox& o) const;
  PixelBox unite(const PixelBox& o) const;

  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

/// Row-major H x W x C raster with intensities in [0, 1]; 1 is paper white.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels = 1, float fill = 1.0F);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  float& at(int y, int x, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  float at(int y, int x, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  /// Copy of the region, filling anything outside the image with `fill`.
  Image crop(const PixelBox& box, float fill = 1.0F) const;
  /// Places `src` with its top-left corner at (x, y), clipping at the borders.
  void paste(const Image& src, int x, int y);
  Image mirrored_horizontally() const;
  /// Luminance in a single channel.
  Image to_gray() const;
  void clamp01();

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 1;
  std::vector<float> data_;
};

/// Stacks images of equal width top to bottom.
Image vstack(const std::vector<Image>& parts);
/// Area-averaging resample; exact box integration in both directions.
Image resize_area(const Image& src, int new_height, int new_width);

/// Sum over pixels and channels of (1 - intensity).
double ink_mass(const Image& img);
/// Bounding box of pixels with any channel below `threshold`; nullopt when none.
std::optional<PixelBox> ink_bbox(const Image& img, float threshold = 0.5F);

Image read_png(const std::filesystem::path& path);
/// 8-bit PNG, gray or RGB depending on channel count.
void write_png(const Image& img, const std::filesystem::path& path);

}  // namespace pixeldoc
