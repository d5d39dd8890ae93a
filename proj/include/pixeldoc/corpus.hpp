#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pixeldoc/degrade.hpp"
#include "pixeldoc/image.hpp"
#include "pixeldoc/rng.hpp"
#include "pixeldoc/scan.hpp"

namespace pixeldoc {

struct Region {
  PixelBox box;
  /// Position in reading order.
  int order = 0;
};

struct PageRegions {
  std::vector<Region> regions;
  std::string page;
};

/// Source of reading-ordered regions for a page image.
class LayoutProvider {
 public:
  virtual ~LayoutProvider() = default;
  virtual PageRegions detect(const Image& page) const = 0;
};

struct ColumnDetectConfig {
  float ink_threshold = 0.5F;
  /// Minimum width of a whitespace valley that separates two columns.
  int min_gutter = 12;
  /// A column counts as blank while its ink share stays at or below this.
  double blank_share = 0.005;
};

/// Vertical projection profile: columns are the ink runs separated by wide
/// blank valleys, split at the valley midpoints, left to right.
PageRegions detect_columns(const Image& page, const ColumnDetectConfig& cfg = {});

class ProjectionColumnDetector final : public LayoutProvider {
 public:
  explicit ProjectionColumnDetector(ColumnDetectConfig cfg = {}) : cfg_(cfg) {}
  PageRegions detect(const Image& page) const override { return detect_columns(page, cfg_); }

 private:
  ColumnDetectConfig cfg_;
};

struct LinearizedPage {
  Image strip;
  /// Zero-area regions that were dropped.
  int skipped = 0;
};

/// Crops every region, resizes it to `target_width` keeping the aspect ratio
/// and stacks the results in reading order.
LinearizedPage linearize(const Image& page, const PageRegions& regions, int target_width = 368);

struct Crop {
  Scan scan;
  int offset = 0;
};

/// Square windows down the strip.  Strips shorter than the window give one
/// bottom-padded crop.  `anchor_bottom` adds a final crop flush with the strip
/// bottom when the stride leaves a remainder.
std::vector<Crop> sliding_crops(const Image& strip, int window = 368, int stride = 128, bool anchor_bottom = false);

/// Closed-form crop count for the default (non-anchored) mode.
int crop_count(int height, int window, int stride);

struct ManifestEntry {
  std::string path;
  std::string source;
  int crop_offset = 0;
  std::string split = "train";
  std::uint64_t seed = 0;
  std::optional<RenderPlan> truth;
  std::optional<AppliedTransform> transform;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  double split_fraction = 0.0;
};

/// Page-level split: all crops of one source page land in the same split.
DatasetManifest split_dataset(const DatasetManifest& manifest, double fraction, Rng& rng);

}  // namespace pixeldoc
