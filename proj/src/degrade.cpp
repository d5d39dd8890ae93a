#include "pixeldoc/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pixeldoc/errors.hpp"

namespace pixeldoc {

DegradationConfig DegradationConfig::none() {
  DegradationConfig cfg;
  for (EffectConfig* e : {&cfg.bleed, &cfg.salt_pepper, &cfg.blur, &cfg.rotation, &cfg.lines, &cfg.stains,
                          &cfg.holes, &cfg.bg_jitter})
    e->enabled = false;
  return cfg;
}

void DegradationConfig::validate() const {
  const std::pair<const char*, const EffectConfig*> all[] = {
      {"bleed", &bleed}, {"salt_pepper", &salt_pepper}, {"blur", &blur},   {"rotation", &rotation},
      {"lines", &lines}, {"stains", &stains},           {"holes", &holes}, {"bg_jitter", &bg_jitter}};
  for (const auto& [name, e] : all) {
    require(e->lo <= e->hi, ErrorKind::ConfigInvalid, std::string("degrade.") + name + ": range low > high");
    require(e->prob >= 0.0 && e->prob <= 1.0, ErrorKind::ConfigInvalid,
            std::string("degrade.") + name + ": probability outside [0, 1]");
  }
  require(bleed.lo >= 0.0 && bleed.hi <= 1.0, ErrorKind::ConfigInvalid, "degrade.bleed: alpha outside [0, 1]");
  require(salt_pepper.lo >= 0.0 && salt_pepper.hi <= 1.0, ErrorKind::ConfigInvalid,
          "degrade.salt_pepper: density outside [0, 1]");
  require(blur.lo >= 0.0, ErrorKind::ConfigInvalid, "degrade.blur: negative sigma");
  require(bg_jitter.lo >= 0.0 && bg_jitter.hi <= 1.0, ErrorKind::ConfigInvalid,
          "degrade.bg_jitter: level outside [0, 1]");
}

namespace {

bool fires(const EffectConfig& e, Rng& rng) { return e.enabled && bernoulli(rng, e.prob); }

int draw_count(const EffectConfig& e, Rng& rng) {
  return uniform_int(rng, static_cast<int>(std::lround(e.lo)), static_cast<int>(std::lround(e.hi)));
}

double draw(const EffectConfig& e, Rng& rng) { return e.lo == e.hi ? e.lo : uniform(rng, e.lo, e.hi); }

void apply_stains(Image& img, const std::vector<double>& p) {
  const int n = static_cast<int>(p[0]);
  for (int k = 0; k < n; ++k) {
    const double cx = p[1 + 4 * k], cy = p[2 + 4 * k], r = p[3 + 4 * k], intensity = p[4 + 4 * k];
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) {
        const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
        if (d >= r) continue;
        const double q = d / r;
        // darker towards the rim, like a dried water mark
        const auto factor = static_cast<float>(1.0 - intensity * (0.4 + 0.6 * q * q));
        for (int c = 0; c < img.channels(); ++c) img.at(y, x, c) *= factor;
      }
  }
}

void apply_holes(Image& img, const std::vector<double>& p) {
  const int n = static_cast<int>(p[0]);
  for (int k = 0; k < n; ++k) {
    const double cx = p[1 + 4 * k], cy = p[2 + 4 * k], rx = p[3 + 4 * k], ry = p[4 + 4 * k];
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) {
        const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
        if (dx * dx + dy * dy <= 1.0)
          for (int c = 0; c < img.channels(); ++c) img.at(y, x, c) = 1.0F;
      }
  }
}

void apply_lines(Image& img, const std::vector<double>& p) {
  const int n = static_cast<int>(p[0]);
  for (int k = 0; k < n; ++k) {
    const bool vertical = p[1 + 4 * k] != 0.0;
    const int pos = static_cast<int>(p[2 + 4 * k]);
    const int thickness = static_cast<int>(p[3 + 4 * k]);
    const auto level = static_cast<float>(p[4 + 4 * k]);
    for (int t = 0; t < thickness; ++t) {
      if (vertical) {
        const int x = pos + t;
        if (x < 0 || x >= img.width()) continue;
        for (int y = 0; y < img.height(); ++y)
          for (int c = 0; c < img.channels(); ++c) img.at(y, x, c) = std::min(img.at(y, x, c), level);
      } else {
        const int y = pos + t;
        if (y < 0 || y >= img.height()) continue;
        for (int x = 0; x < img.width(); ++x)
          for (int c = 0; c < img.channels(); ++c) img.at(y, x, c) = std::min(img.at(y, x, c), level);
      }
    }
  }
}

void apply_salt_pepper(Image& img, double density, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      if (u(rng) >= density) continue;
      const float v = u(rng) < 0.5 ? 0.0F : 1.0F;
      for (int c = 0; c < img.channels(); ++c) img.at(y, x, c) = v;
    }
}

}  // namespace

AppliedTransform sample_transform(const DegradationConfig& cfg, Rng& rng, int height, int width) {
  cfg.validate();
  AppliedTransform t;
  const double side = std::min(height, width);

  if (fires(cfg.bleed, rng)) t.effects.push_back({"bleed", {draw(cfg.bleed, rng)}});

  if (fires(cfg.stains, rng)) {
    const int n = draw_count(cfg.stains, rng);
    if (n > 0) {
      AppliedEffect e{"stains", {static_cast<double>(n)}};
      for (int k = 0; k < n; ++k) {
        e.params.push_back(uniform(rng, 0.0, width));
        e.params.push_back(uniform(rng, 0.0, height));
        e.params.push_back(uniform(rng, 0.1, 0.35) * side);
        e.params.push_back(uniform(rng, 0.05, 0.25));
      }
      t.effects.push_back(std::move(e));
    }
  }

  if (fires(cfg.holes, rng)) {
    const int n = draw_count(cfg.holes, rng);
    if (n > 0) {
      AppliedEffect e{"holes", {static_cast<double>(n)}};
      for (int k = 0; k < n; ++k) {
        e.params.push_back(uniform(rng, 0.0, width));
        e.params.push_back(uniform(rng, 0.0, height));
        e.params.push_back(uniform(rng, 0.02, 0.08) * side);
        e.params.push_back(uniform(rng, 0.02, 0.08) * side);
      }
      t.effects.push_back(std::move(e));
    }
  }

  if (fires(cfg.lines, rng)) {
    const int n = draw_count(cfg.lines, rng);
    if (n > 0) {
      AppliedEffect e{"lines", {static_cast<double>(n)}};
      for (int k = 0; k < n; ++k) {
        const bool vertical = bernoulli(rng, 0.5);
        e.params.push_back(vertical ? 1.0 : 0.0);
        e.params.push_back(uniform_int(rng, 0, (vertical ? width : height) - 1));
        e.params.push_back(uniform_int(rng, 1, 2));
        e.params.push_back(uniform(rng, 0.0, 0.35));
      }
      t.effects.push_back(std::move(e));
    }
  }

  if (fires(cfg.bg_jitter, rng)) t.effects.push_back({"bg_jitter", {draw(cfg.bg_jitter, rng)}});

  if (fires(cfg.rotation, rng)) {
    const double deg = draw(cfg.rotation, rng);
    t.rotation_deg = deg;
    t.effects.push_back({"rotation", {deg}});
  }

  if (fires(cfg.blur, rng)) t.effects.push_back({"blur", {draw(cfg.blur, rng)}});

  if (fires(cfg.salt_pepper, rng)) {
    const double density = draw(cfg.salt_pepper, rng);
    const auto seed = static_cast<double>(rng() >> 11);  // 53 bits survive the double round trip
    t.effects.push_back({"salt_pepper", {density, seed}});
  }
  return t;
}

Image apply_transform(const Image& front, const AppliedTransform& t, const Image& back) {
  Image img = front;
  float background = 1.0F;
  for (const AppliedEffect& e : t.effects) {
    if (e.name == "bleed") {
      img = bleed_through(img, back.empty() ? front : back, e.params.at(0));
    } else if (e.name == "stains") {
      apply_stains(img, e.params);
    } else if (e.name == "holes") {
      apply_holes(img, e.params);
    } else if (e.name == "lines") {
      apply_lines(img, e.params);
    } else if (e.name == "bg_jitter") {
      background = static_cast<float>(e.params.at(0));
      for (float& v : img.data()) v *= background;
    } else if (e.name == "rotation") {
      if (e.params.at(0) != 0.0) img = rotate(img, e.params.at(0), background);
    } else if (e.name == "blur") {
      img = gaussian_blur(img, e.params.at(0));
    } else if (e.name == "salt_pepper") {
      apply_salt_pepper(img, e.params.at(0), static_cast<std::uint64_t>(e.params.at(1)));
    } else {
      fail(ErrorKind::Format, "unknown degradation effect '" + e.name + "'");
    }
  }
  img.clamp01();
  return img;
}

Degraded degrade(const Scan& scan, const DegradationConfig& cfg, Rng& rng, const Image& back) {
  Degraded out{scan, sample_transform(cfg, rng, scan.pixels.height(), scan.pixels.width())};
  if (!out.transform.empty()) out.scan.pixels = apply_transform(scan.pixels, out.transform, back);
  return out;
}

Image bleed_through(const Image& front, const Image& back, double alpha) {
  require(front.height() == back.height() && front.width() == back.width() &&
              front.channels() == back.channels(),
          ErrorKind::ShapeMismatch, "bleed-through: front and back differ in shape");
  const Image mirrored = back.mirrored_horizontally();
  Image out(front.height(), front.width(), front.channels());
  const auto a = static_cast<float>(alpha);
  for (std::size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] = std::clamp((1.0F - a) * front.data()[i] + a * mirrored.data()[i], 0.0F, 1.0F);
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<float> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * i * i / (sigma * sigma));
    kernel[i + radius] = static_cast<float>(w);
    sum += w;
  }
  for (float& k : kernel) k = static_cast<float>(k / sum);

  const int h = img.height(), w = img.width(), ch = img.channels();
  Image tmp(h, w, ch, 0.0F), out(h, w, ch, 0.0F);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        float acc = 0.0F;
        for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * img.at(y, std::clamp(x + k, 0, w - 1), c);
        tmp.at(y, x, c) = acc;
      }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        float acc = 0.0F;
        for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * tmp.at(std::clamp(y + k, 0, h - 1), x, c);
        out.at(y, x, c) = acc;
      }
  return out;
}

void rotate_point(double degrees, int height, int width, double& x, double& y) {
  const double th = degrees * std::numbers::pi / 180.0;
  const double cx = width / 2.0, cy = height / 2.0;
  const double dx = x - cx, dy = y - cy;
  x = cx + std::cos(th) * dx - std::sin(th) * dy;
  y = cy + std::sin(th) * dx + std::cos(th) * dy;
}

Image rotate(const Image& img, double degrees, float fill) {
  const int h = img.height(), w = img.width(), ch = img.channels();
  Image out(h, w, ch, fill);
  auto sample = [&](int yy, int xx, int c) {
    if (yy < 0 || yy >= h || xx < 0 || xx >= w) return fill;
    return img.at(yy, xx, c);
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      // inverse map of the destination pixel centre
      double sx = x + 0.5, sy = y + 0.5;
      rotate_point(-degrees, h, w, sx, sy);
      sx -= 0.5;
      sy -= 0.5;
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const auto fx = static_cast<float>(sx - x0), fy = static_cast<float>(sy - y0);
      for (int c = 0; c < ch; ++c) {
        const float top = (1 - fx) * sample(y0, x0, c) + fx * sample(y0, x0 + 1, c);
        const float bottom = (1 - fx) * sample(y0 + 1, x0, c) + fx * sample(y0 + 1, x0 + 1, c);
        out.at(y, x, c) = (1 - fy) * top + fy * bottom;
      }
    }
  return out;
}

std::vector<PixelBox> transport_boxes(const std::vector<PixelBox>& boxes, const AppliedTransform& t,
                                      int height, int width) {
  if (!t.geometric()) return boxes;
  const PixelBox canvas{0, 0, width, height};
  std::vector<PixelBox> out;
  out.reserve(boxes.size());
  for (const PixelBox& b : boxes) {
    double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
    for (const auto& [px, py] : {std::pair{b.x0, b.y0}, {b.x1, b.y0}, {b.x0, b.y1}, {b.x1, b.y1}}) {
      double x = px, y = py;
      rotate_point(t.rotation_deg, height, width, x, y);
      min_x = std::min(min_x, x);
      min_y = std::min(min_y, y);
      max_x = std::max(max_x, x);
      max_y = std::max(max_y, y);
    }
    const PixelBox r{static_cast<int>(std::floor(min_x)), static_cast<int>(std::floor(min_y)),
                     static_cast<int>(std::ceil(max_x)), static_cast<int>(std::ceil(max_y))};
    out.push_back(r.intersect(canvas));
  }
  return out;
}

PatchMask transport_mask(const PatchMask& mask, const AppliedTransform& t, const RenderPlan* truth) {
  if (!t.geometric()) return mask;
  require(truth != nullptr, ErrorKind::MissingTruth, "rotation applied to a labelled scan without word boxes");
  const PatchGrid& grid = mask.grid();
  std::vector<PixelBox> labelled;
  for (const WordBox& wb : truth->word_boxes) {
    const PixelBox one[] = {wb.box};
    const PatchMask footprint = boxes_to_mask(one, grid);
    if (footprint.any() && footprint.intersection(mask) == footprint.count()) labelled.push_back(wb.box);
  }
  const auto moved = transport_boxes(labelled, t, grid.height_px(), grid.width_px());
  return boxes_to_mask(moved, grid);
}

}  // namespace pixeldoc
