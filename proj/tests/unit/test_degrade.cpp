#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pixeldoc/degrade.hpp"
#include "pixeldoc/errors.hpp"
#include "pixeldoc/manifest.hpp"

using namespace pixeldoc;

namespace {

Image random_image(int h, int w, Rng& rng, int channels = 1) {
  Image img(h, w, channels);
  for (float& v : img.data()) v = static_cast<float>(uniform(rng, 0.0, 1.0));
  return img;
}

Scan scan_of(Image img) {
  Scan s;
  s.pixels = std::move(img);
  return s;
}

DegradationConfig only(EffectConfig DegradationConfig::*field, double lo, double hi) {
  DegradationConfig c = DegradationConfig::none();
  c.*field = {true, 1.0, lo, hi};
  return c;
}

// Patches touched by the axis-aligned hull of each rotated box, by pixel iteration.
PatchMask rotated_oracle(const std::vector<PixelBox>& boxes, double deg, const PatchGrid& g) {
  const double th = deg * std::numbers::pi / 180.0;
  const double cx = g.width_px() / 2.0, cy = g.height_px() / 2.0;
  PatchMask m(g);
  for (const auto& b : boxes) {
    double lo_x = 1e9, lo_y = 1e9, hi_x = -1e9, hi_y = -1e9;
    for (double px : {double(b.x0), double(b.x1)})
      for (double py : {double(b.y0), double(b.y1)}) {
        const double x = cx + (px - cx) * std::cos(th) - (py - cy) * std::sin(th);
        const double y = cy + (px - cx) * std::sin(th) + (py - cy) * std::cos(th);
        lo_x = std::min(lo_x, x);
        lo_y = std::min(lo_y, y);
        hi_x = std::max(hi_x, x);
        hi_y = std::max(hi_y, y);
      }
    const int x0 = std::max(0, int(std::floor(lo_x))), x1 = std::min(g.width_px(), int(std::ceil(hi_x)));
    const int y0 = std::max(0, int(std::floor(lo_y))), y1 = std::min(g.height_px(), int(std::ceil(hi_y)));
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) m.set(y / g.patch_size, x / g.patch_size);
  }
  return m;
}

RenderPlan plan_with(const std::vector<PixelBox>& boxes, int size) {
  RenderPlan p;
  p.width = size;
  p.height = size;
  for (const auto& b : boxes) p.word_boxes.push_back({"w", b});
  return p;
}

}  // namespace

TEST_CASE("disabled effects give the identity") {
  Rng rng(1);
  const Scan s = scan_of(random_image(32, 32, rng));
  const Degraded d = degrade(s, DegradationConfig::none(), rng);
  CHECK(d.transform.empty());
  CHECK(d.scan.pixels == s.pixels);
}

TEST_CASE("config validation") {
  DegradationConfig c;
  c.blur.lo = 2.0;
  c.blur.hi = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.holes.prob = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_NOTHROW(DegradationConfig{}.validate());
}

TEST_CASE("degrade is deterministic, keeps dimensions and replays exactly") {
  for (int i = 0; i < 30; ++i) {
    Rng src = make_rng(2, "img", i);
    const Scan s = scan_of(random_image(48, 64, src));
    Rng a = make_rng(2, "deg", i), b = make_rng(2, "deg", i);
    const Degraded x = degrade(s, DegradationConfig{}, a);
    const Degraded y = degrade(s, DegradationConfig{}, b);
    CHECK(x.transform == y.transform);
    CHECK(x.scan.pixels == y.scan.pixels);
    CHECK(x.scan.pixels.height() == 48);
    CHECK(x.scan.pixels.width() == 64);
    for (float v : x.scan.pixels.data()) {
      CHECK(v >= 0.0F);
      CHECK(v <= 1.0F);
    }
    if (!x.transform.empty()) CHECK(apply_transform(s.pixels, x.transform) == x.scan.pixels);
  }
}

TEST_CASE("drawn parameters respect their ranges") {
  const DegradationConfig cfg;
  for (int i = 0; i < 300; ++i) {
    Rng rng = make_rng(3, "ranges", i);
    const AppliedTransform t = sample_transform(cfg, rng, 64, 64);
    for (const auto& e : t.effects) {
      const double v = e.params.at(0);
      if (e.name == "bleed") CHECK((v >= 0.1 && v <= 0.3));
      if (e.name == "salt_pepper") CHECK((v >= 0.0 && v <= 0.05));
      if (e.name == "blur") CHECK((v >= 0.2 && v <= 1.5));
      if (e.name == "rotation") CHECK((v >= -3.0 && v <= 3.0));
      if (e.name == "lines") CHECK((v >= 0 && v <= 3));
      if (e.name == "stains" || e.name == "holes") CHECK((v >= 0 && v <= 2));
      if (e.name == "bg_jitter") CHECK((v >= 235.0 / 255.0 && v <= 1.0));
    }
  }
}

TEST_CASE("salt and pepper flips about the drawn density") {
  Image gray(368, 368, 1, 0.5F);
  Rng rng(4);
  const Degraded d = degrade(scan_of(gray), only(&DegradationConfig::salt_pepper, 0.05, 0.05), rng);
  int flipped = 0;
  for (std::size_t i = 0; i < gray.data().size(); ++i) flipped += d.scan.pixels.data()[i] != 0.5F ? 1 : 0;
  const double n = 368.0 * 368.0;
  const double sigma = std::sqrt(n * 0.05 * 0.95);
  CHECK(std::abs(flipped - 0.05 * n) < 4.0 * sigma);
  for (float v : d.scan.pixels.data()) CHECK((v == 0.5F || v == 0.0F || v == 1.0F));
}

TEST_CASE("bleed-through blends with the mirrored back page") {
  Rng rng(5);
  const Image front = random_image(8, 12, rng), back = random_image(8, 12, rng);
  CHECK(bleed_through(front, back, 0.0) == front);
  const Image full = bleed_through(front, back, 1.0);
  const Image mid = bleed_through(front, back, 0.25);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 12; ++x) {
      CHECK(full.at(y, x) == back.at(y, 11 - x));
      CHECK(mid.at(y, x) == doctest::Approx(0.75 * front.at(y, x) + 0.25 * back.at(y, 11 - x)).epsilon(1e-6));
    }
  CHECK_THROWS_AS(bleed_through(front, Image(8, 10), 0.5), Error);
}

TEST_CASE("separable blur equals direct 2D convolution") {
  Rng rng(6);
  const Image img = random_image(20, 17, rng);
  const double sigma = 1.2;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i) norm += std::exp(-0.5 * i * i / (sigma * sigma));
  const Image out = gaussian_blur(img, sigma);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 17; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        for (int j = -radius; j <= radius; ++j) {
          const double w = std::exp(-0.5 * (i * i + j * j) / (sigma * sigma)) / (norm * norm);
          acc += w * img.at(std::clamp(y + i, 0, 19), std::clamp(x + j, 0, 16));
        }
      CHECK(out.at(y, x) == doctest::Approx(acc).epsilon(1e-5));
    }
  CHECK(gaussian_blur(img, 0.0) == img);
}

TEST_CASE("rotation by a quarter turn permutes pixels") {
  Rng rng(7);
  const Image img = random_image(16, 16, rng);
  const Image r = rotate(img, 90.0);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) CHECK(r.at(x, 15 - y) == doctest::Approx(img.at(y, x)).epsilon(1e-5));
  CHECK(rotate(img, 0.0) == img);
}

TEST_CASE("zero rotation and zero blur leave geometry unchanged") {
  DegradationConfig cfg = only(&DegradationConfig::rotation, 0.0, 0.0);
  cfg.blur = {true, 1.0, 0.0, 0.0};
  Rng rng(8);
  const Image img = random_image(32, 32, rng);
  const Degraded d = degrade(scan_of(img), cfg, rng);
  CHECK(d.transform.rotation_deg == 0.0);
  CHECK_FALSE(d.transform.geometric());
  CHECK(d.scan.pixels == img);
}

TEST_CASE("photometric transforms never move the mask") {
  DegradationConfig cfg;
  cfg.rotation.enabled = false;
  const PatchGrid g{4, 4, 16};
  for (int i = 0; i < 100; ++i) {
    Rng rng = make_rng(9, "photo", i);
    const AppliedTransform t = sample_transform(cfg, rng, 64, 64);
    PatchMask m(g);
    for (int k = 0; k < g.count(); ++k) m.set_flat(k, bernoulli(rng, 0.3));
    CHECK(transport_mask(m, t, nullptr) == m);
  }
}

TEST_CASE("rotation transports word boxes like the corner oracle") {
  const PatchGrid g{4, 4, 16};
  for (int i = 0; i < 300; ++i) {
    Rng rng = make_rng(10, "rot", i);
    const int x0 = uniform_int(rng, 0, 50), y0 = uniform_int(rng, 0, 56);
    const PixelBox box{x0, y0, x0 + uniform_int(rng, 2, 14), y0 + uniform_int(rng, 2, 8)};
    AppliedTransform t;
    t.rotation_deg = uniform(rng, -3.0, 3.0);
    t.effects.push_back({"rotation", {t.rotation_deg}});
    const std::vector<PixelBox> boxes{box};
    const RenderPlan truth = plan_with(boxes, 64);
    const PatchMask before = boxes_to_mask(boxes, g);
    CHECK(transport_mask(before, t, &truth) == rotated_oracle(boxes, t.rotation_deg, g));
  }
}

TEST_CASE("small rotations keep a centred box in its patch and can push a straddling box over") {
  const PatchGrid g{4, 4, 16};
  AppliedTransform t;
  t.rotation_deg = 3.0;
  t.effects.push_back({"rotation", {3.0}});

  const std::vector<PixelBox> inside{{36, 36, 42, 42}};
  const RenderPlan truth_inside = plan_with(inside, 64);
  const PatchMask m_inside = boxes_to_mask(inside, g);
  CHECK(transport_mask(m_inside, t, &truth_inside) == m_inside);

  // near the bottom edge a positive rotation moves points left, near the top right
  const std::vector<PixelBox> edge{{45, 2, 48, 6}};
  const RenderPlan truth_edge = plan_with(edge, 64);
  const PatchMask m_edge = boxes_to_mask(edge, g);
  const PatchMask moved = transport_mask(m_edge, t, &truth_edge);
  CHECK(m_edge.get(0, 2));
  CHECK(moved.get(0, 3));
  CHECK(moved == rotated_oracle(edge, 3.0, g));
}

TEST_CASE("rotation without truth is an error") {
  AppliedTransform t;
  t.rotation_deg = 1.0;
  PatchMask m(PatchGrid{4, 4, 16});
  m.set(1, 1);
  try {
    transport_mask(m, t, nullptr);
    FAIL("expected MissingTruth");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingTruth);
  }
}

TEST_CASE("transforms and configs round trip through json") {
  Rng rng(11);
  const AppliedTransform t = sample_transform(DegradationConfig{}, rng, 64, 64);
  CHECK(Json(t).get<AppliedTransform>() == t);

  DegradationConfig c;
  c.blur.hi = 0.9;
  const DegradationConfig back = degradation_from_json(Json(c), "degrade");
  CHECK(back.blur.hi == 0.9);
  CHECK_THROWS_AS(degradation_from_json(Json{{"smudge", Json::object()}}, "degrade"), Error);
  CHECK_THROWS_AS(degradation_from_json(Json{{"blur", {{"range", {2.0, 1.0}}}}}, "degrade"), Error);
}
