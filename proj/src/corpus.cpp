#include "pixeldoc/corpus.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "pixeldoc/errors.hpp"

namespace pixeldoc {

PageRegions detect_columns(const Image& page, const ColumnDetectConfig& cfg) {
  const Image gray = page.to_gray();
  const int w = gray.width(), h = gray.height();
  std::vector<int> profile(w, 0);
  long total = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (gray.at(y, x) < cfg.ink_threshold) {
        ++profile[x];
        ++total;
      }
  require(total > 0, ErrorKind::NoInk, "page has no ink");

  const int blank_limit = static_cast<int>(cfg.blank_share * h);
  std::vector<bool> blank(w);
  for (int x = 0; x < w; ++x) blank[x] = profile[x] <= blank_limit;

  int first_ink = 0, last_ink = w - 1;
  while (first_ink < w && blank[first_ink]) ++first_ink;
  while (last_ink >= 0 && blank[last_ink]) --last_ink;

  std::vector<int> cuts;
  int x = first_ink;
  while (x <= last_ink) {
    if (!blank[x]) {
      ++x;
      continue;
    }
    const int start = x;
    while (x <= last_ink && blank[x]) ++x;
    if (x - start >= cfg.min_gutter) cuts.push_back((start + x) / 2);
  }

  PageRegions out;
  int left = 0;
  for (std::size_t i = 0; i <= cuts.size(); ++i) {
    const int right = i < cuts.size() ? cuts[i] : w;
    out.regions.push_back({PixelBox{left, 0, right, h}, static_cast<int>(i)});
    left = right;
  }
  return out;
}

LinearizedPage linearize(const Image& page, const PageRegions& regions, int target_width) {
  require(!regions.regions.empty(), ErrorKind::UsageError, "linearize: no regions");
  require(target_width > 0, ErrorKind::UsageError, "linearize: target width must be positive");

  std::vector<const Region*> ordered;
  for (const auto& r : regions.regions) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(), [](const Region* a, const Region* b) { return a->order < b->order; });
  for (std::size_t i = 0; i < ordered.size(); ++i)
    require(ordered[i]->order == static_cast<int>(i), ErrorKind::Format,
            "region reading-order indices are not a permutation of 0..n-1");

  LinearizedPage out;
  const PixelBox bounds{0, 0, page.width(), page.height()};
  std::vector<Image> bands;
  for (const Region* r : ordered) {
    const PixelBox b = r->box.intersect(bounds);
    if (b.empty()) {
      ++out.skipped;
      spdlog::warn("linearize: skipping degenerate region {} of page '{}'", r->order, regions.page);
      continue;
    }
    const Image crop = page.crop(b);
    const int new_h = std::max(1, static_cast<int>(std::lround(static_cast<double>(b.height()) * target_width / b.width())));
    bands.push_back(resize_area(crop, new_h, target_width));
  }
  require(!bands.empty(), ErrorKind::NoInk, "linearize: every region is degenerate");
  out.strip = vstack(bands);
  return out;
}

int crop_count(int height, int window, int stride) {
  if (height < window) return 1;
  return (height - window) / stride + 1;
}

std::vector<Crop> sliding_crops(const Image& strip, int window, int stride, bool anchor_bottom) {
  require(window > 0 && stride > 0, ErrorKind::UsageError, "window and stride must be positive");
  require(strip.width() == window, ErrorKind::ShapeMismatch,
          "strip width " + std::to_string(strip.width()) + " differs from window " + std::to_string(window));
  std::vector<int> offsets;
  if (strip.height() < window) {
    offsets.push_back(0);
  } else {
    for (int y = 0; y + window <= strip.height(); y += stride) offsets.push_back(y);
    if (anchor_bottom && offsets.back() + window < strip.height()) offsets.push_back(strip.height() - window);
  }
  std::vector<Crop> crops;
  for (int y : offsets) {
    Crop c;
    c.offset = y;
    c.scan.pixels = strip.crop({0, y, window, y + window}, 1.0F);
    crops.push_back(std::move(c));
  }
  return crops;
}

DatasetManifest split_dataset(const DatasetManifest& manifest, double fraction, Rng& rng) {
  require(fraction > 0.0 && fraction < 1.0, ErrorKind::UsageError, "split fraction must lie in (0, 1)");
  std::set<std::string> unique;
  for (const auto& e : manifest.entries) unique.insert(e.source);
  std::vector<std::string> pages(unique.begin(), unique.end());

  std::size_t n_val = 0;
  if (pages.size() <= 1) {
    spdlog::warn("split_dataset: only {} source page(s); everything goes to train", pages.size());
  } else {
    n_val = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(pages.size())));
    n_val = std::min(n_val, pages.size() - 1);
  }
  std::shuffle(pages.begin(), pages.end(), rng);
  const std::set<std::string> validation(pages.begin(), pages.begin() + static_cast<std::ptrdiff_t>(n_val));

  DatasetManifest out = manifest;
  out.split_fraction = fraction;
  for (auto& e : out.entries) e.split = validation.count(e.source) != 0 ? "validation" : "train";
  return out;
}

}  // namespace pixeldoc
