#pragma once

#include <string>
#include <vector>

#include "pixeldoc/image.hpp"
#include "pixeldoc/masking.hpp"
#include "pixeldoc/rng.hpp"
#include "pixeldoc/scan.hpp"

namespace pixeldoc {

/// One degradation effect: applied with probability `prob` when enabled,
/// with its main parameter drawn uniformly from [lo, hi] (integers for counts).
struct EffectConfig {
  bool enabled = true;
  double prob = 0.5;
  double lo = 0.0;
  double hi = 0.0;
};

struct DegradationConfig {
  EffectConfig bleed{true, 0.5, 0.1, 0.3};            // alpha
  EffectConfig salt_pepper{true, 0.5, 0.0, 0.05};     // density
  EffectConfig blur{true, 0.5, 0.2, 1.5};             // sigma
  EffectConfig rotation{true, 0.5, -3.0, 3.0};        // degrees
  EffectConfig lines{true, 0.3, 0, 3};                // count
  EffectConfig stains{true, 0.3, 0, 2};               // count
  EffectConfig holes{true, 0.2, 0, 2};                // count
  EffectConfig bg_jitter{true, 0.7, 235.0 / 255.0, 1.0};  // background level

  /// Every effect disabled.
  static DegradationConfig none();
  /// Throws ConfigInvalid when a range is reversed or a probability is outside [0, 1].
  void validate() const;
};

/// A drawn effect with the parameters needed to replay it exactly.
struct AppliedEffect {
  std::string name;
  std::vector<double> params;

  friend bool operator==(const AppliedEffect&, const AppliedEffect&) = default;
};

struct AppliedTransform {
  double rotation_deg = 0.0;
  std::vector<AppliedEffect> effects;

  bool empty() const { return effects.empty(); }
  /// True when pixel geometry moved (only rotation does that).
  bool geometric() const { return rotation_deg != 0.0; }

  friend bool operator==(const AppliedTransform&, const AppliedTransform&) = default;
};

/// Draws the effect parameters for an image of the given size.
AppliedTransform sample_transform(const DegradationConfig& cfg, Rng& rng, int height, int width);

/// Replays a drawn transform.  `back` is the reverse page used for
/// bleed-through; the mirrored front is used when it is empty.
Image apply_transform(const Image& front, const AppliedTransform& t, const Image& back = {});

struct Degraded {
  Scan scan;
  AppliedTransform transform;
};

Degraded degrade(const Scan& scan, const DegradationConfig& cfg, Rng& rng, const Image& back = {});

// Individual effects, exposed for tests and tools.
Image bleed_through(const Image& front, const Image& back, double alpha);
Image gaussian_blur(const Image& img, double sigma);
/// Bilinear rotation about the image centre; uncovered area takes `fill`.
Image rotate(const Image& img, double degrees, float fill = 1.0F);

/// Forward map of a pixel-space point under the rotation used by `rotate`.
void rotate_point(double degrees, int height, int width, double& x, double& y);
/// Axis-aligned hull of each rotated box, clipped to the image.
std::vector<PixelBox> transport_boxes(const std::vector<PixelBox>& boxes, const AppliedTransform& t,
                                      int height, int width);

/// Carries a label mask through a transform.  Photometric transforms return
/// the mask unchanged.  Under rotation the word boxes of `truth` that the mask
/// covers are rotated and re-quantized; throws MissingTruth without truth.
PatchMask transport_mask(const PatchMask& mask, const AppliedTransform& t, const RenderPlan* truth);

}  // namespace pixeldoc
