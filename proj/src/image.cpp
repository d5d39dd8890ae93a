#include "pixeldoc/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "pixeldoc/errors.hpp"

namespace pixeldoc {

PixelBox PixelBox::intersect(const PixelBox& o) const {
  PixelBox r{std::max(x0, o.x0), std::max(y0, o.y0), std::min(x1, o.x1), std::min(y1, o.y1)};
  if (r.empty()) return PixelBox{};
  return r;
}

PixelBox PixelBox::unite(const PixelBox& o) const {
  if (empty()) return o;
  if (o.empty()) return *this;
  return {std::min(x0, o.x0), std::min(y0, o.y0), std::max(x1, o.x1), std::max(y1, o.y1)};
}

Image::Image(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  require(height >= 0 && width >= 0, ErrorKind::ShapeMismatch, "negative image dimensions");
  require(channels == 1 || channels == 3, ErrorKind::ShapeMismatch,
          "images carry 1 or 3 channels, got " + std::to_string(channels));
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image Image::crop(const PixelBox& box, float fill) const {
  Image out(box.height(), box.width(), channels_, fill);
  for (int y = 0; y < box.height(); ++y) {
    const int sy = box.y0 + y;
    if (sy < 0 || sy >= height_) continue;
    for (int x = 0; x < box.width(); ++x) {
      const int sx = box.x0 + x;
      if (sx < 0 || sx >= width_) continue;
      for (int c = 0; c < channels_; ++c) out.at(y, x, c) = at(sy, sx, c);
    }
  }
  return out;
}

void Image::paste(const Image& src, int x, int y) {
  require(src.channels() == channels_, ErrorKind::ShapeMismatch, "paste: channel mismatch");
  for (int yy = 0; yy < src.height(); ++yy) {
    const int dy = y + yy;
    if (dy < 0 || dy >= height_) continue;
    for (int xx = 0; xx < src.width(); ++xx) {
      const int dx = x + xx;
      if (dx < 0 || dx >= width_) continue;
      for (int c = 0; c < channels_; ++c) at(dy, dx, c) = src.at(yy, xx, c);
    }
  }
}

Image Image::mirrored_horizontally() const {
  Image out(height_, width_, channels_);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      for (int c = 0; c < channels_; ++c) out.at(y, x, c) = at(y, width_ - 1 - x, c);
  return out;
}

Image Image::to_gray() const {
  if (channels_ == 1) return *this;
  Image out(height_, width_, 1);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      out.at(y, x) = 0.299F * at(y, x, 0) + 0.587F * at(y, x, 1) + 0.114F * at(y, x, 2);
  return out;
}

void Image::clamp01() {
  for (float& v : data_) v = std::clamp(v, 0.0F, 1.0F);
}

Image vstack(const std::vector<Image>& parts) {
  if (parts.empty()) return {};
  int h = 0;
  const int w = parts.front().width();
  const int c = parts.front().channels();
  for (const auto& p : parts) {
    require(p.width() == w && p.channels() == c, ErrorKind::ShapeMismatch,
            "vstack: parts differ in width or channels");
    h += p.height();
  }
  Image out(h, w, c);
  int y = 0;
  for (const auto& p : parts) {
    out.paste(p, 0, y);
    y += p.height();
  }
  return out;
}

namespace {

struct Tap {
  int index;
  double weight;
};

// For each output cell along one axis, the input cells it overlaps and the
// normalized overlap lengths.
std::vector<std::vector<Tap>> area_taps(int in_size, int out_size) {
  std::vector<std::vector<Tap>> taps(out_size);
  const double scale = static_cast<double>(in_size) / out_size;
  for (int o = 0; o < out_size; ++o) {
    const double lo = o * scale;
    const double hi = (o + 1) * scale;
    const int first = static_cast<int>(std::floor(lo));
    const int last = std::min(in_size - 1, static_cast<int>(std::ceil(hi)) - 1);
    for (int i = first; i <= last; ++i) {
      const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
      if (overlap > 0) taps[o].push_back({i, overlap / scale});
    }
  }
  return taps;
}

}  // namespace

Image resize_area(const Image& src, int new_height, int new_width) {
  require(new_height > 0 && new_width > 0, ErrorKind::ShapeMismatch, "resize to empty image");
  if (src.height() == new_height && src.width() == new_width) return src;
  const int c = src.channels();
  const auto xt = area_taps(src.width(), new_width);
  const auto yt = area_taps(src.height(), new_height);

  std::vector<double> rows(static_cast<std::size_t>(src.height()) * new_width * c, 0.0);
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < new_width; ++x)
      for (const Tap& t : xt[x])
        for (int ch = 0; ch < c; ++ch)
          rows[(static_cast<std::size_t>(y) * new_width + x) * c + ch] +=
              t.weight * src.at(y, t.index, ch);

  Image out(new_height, new_width, c, 0.0F);
  for (int y = 0; y < new_height; ++y)
    for (int x = 0; x < new_width; ++x)
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (const Tap& t : yt[y])
          acc += t.weight * rows[(static_cast<std::size_t>(t.index) * new_width + x) * c + ch];
        out.at(y, x, ch) = static_cast<float>(acc);
      }
  return out;
}

double ink_mass(const Image& img) {
  double m = 0.0;
  for (float v : img.data()) m += 1.0 - v;
  return m;
}

std::optional<PixelBox> ink_bbox(const Image& img, float threshold) {
  PixelBox box{img.width(), img.height(), 0, 0};
  bool any = false;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c)
        if (img.at(y, x, c) < threshold) {
          any = true;
          box.x0 = std::min(box.x0, x);
          box.y0 = std::min(box.y0, y);
          box.x1 = std::max(box.x1, x + 1);
          box.y1 = std::max(box.y1, y + 1);
        }
  if (!any) return std::nullopt;
  return box;
}

Image read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&png, path.string().c_str()) == 0)
    fail(ErrorKind::Io, path.string() + ": " + png.message);
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr) == 0) {
    png_image_free(&png);
    fail(ErrorKind::Format, path.string() + ": " + png.message);
  }
  const int channels = color ? 3 : 1;
  Image img(static_cast<int>(png.height), static_cast<int>(png.width), channels);
  for (std::size_t i = 0; i < buffer.size(); ++i) img.data()[i] = buffer[i] / 255.0F;
  return img;
}

void write_png(const Image& img, const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width());
  png.height = static_cast<png_uint_32>(img.height());
  png.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(img.data().size());
  for (std::size_t i = 0; i < buffer.size(); ++i)
    buffer[i] = static_cast<png_byte>(std::lround(std::clamp(img.data()[i], 0.0F, 1.0F) * 255.0F));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (png_image_write_to_file(&png, path.string().c_str(), 0, buffer.data(), 0, nullptr) == 0)
    fail(ErrorKind::Io, path.string() + ": " + png.message);
}

}  // namespace pixeldoc
